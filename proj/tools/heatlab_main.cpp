#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

#include "heatlab/cli.hpp"

// Command-line front end. Every experiment is described by a JSON config;
// the subcommand name picks the command, --config supplies the rest, and a
// few common knobs can be overridden inline.
int main(int argc, char** argv) {
    CLI::App app{"heatlab: heat-flow quantitative differentiation laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out = "out";
    std::string format = "json";

    struct InlineOpts {
        int n = 1;
        double gamma = 1.0;
        bool has_gamma = false;
        bool auto_gamma = false;
        double q = 2.0;
        bool has_q = false;
        std::string space;   // "lp:<dim>:<p>"
        std::string scales;  // "<t_min>:<t_max>:<points>"
        int ball_samples = 0;
        int atoms = 0;
        int directions = 0;
    } opts;

    const std::vector<std::string> commands = {"invariants", "evolute",     "gfunction",
                                               "dorronsoro", "local",       "spectral",
                                               "wasserstein", "identity-check"};
    std::map<std::string, CLI::App*> subs;
    for (const auto& name : commands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--threads", threads, "worker count");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--format", format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
        subs[name] = sub;
    }
    subs["identity-check"]->add_option("--n", opts.n, "dimension");
    subs["identity-check"]
        ->add_option("--gamma", opts.gamma, "heat-time coefficient")
        ->each([&](const std::string&) { opts.has_gamma = true; });
    subs["dorronsoro"]
        ->add_option("--q", opts.q, "integrability exponent")
        ->each([&](const std::string&) { opts.has_q = true; });
    subs["dorronsoro"]
        ->add_option("--gamma", opts.gamma, "heat-time coefficient")
        ->each([&](const std::string&) { opts.has_gamma = true; });
    subs["dorronsoro"]->add_flag("--auto-gamma", opts.auto_gamma, "choose gamma from the field");
    subs["dorronsoro"]->add_option("--ball-samples", opts.ball_samples, "inner-average points");
    subs["dorronsoro"]->add_option("--space", opts.space, "domain space, e.g. lp:2:2");
    subs["dorronsoro"]->add_option("--scales", opts.scales, "t grid, t_min:t_max:points");
    subs["wasserstein"]->add_option("--atoms", opts.atoms, "atoms per half-ball measure");
    subs["wasserstein"]->add_option("--directions", opts.directions, "sphere directions");
    subs["wasserstein"]->add_option("--space", opts.space, "space, e.g. lp:2:inf");
    subs["invariants"]->add_option("--space", opts.space, "space, e.g. lp:3:1");

    CLI11_PARSE(app, argc, argv);

    std::string command;
    for (const auto& name : commands)
        if (subs[name]->parsed()) command = name;

    nlohmann::json config = heatlab::cli::default_config(command);
    if (!config_path.empty()) {
        std::ifstream is(config_path);
        if (!is) {
            std::cerr << "config error: cannot open " << config_path << "\n";
            return heatlab::cli::kExitConfig;
        }
        try {
            nlohmann::json from_file = nlohmann::json::parse(is);
            for (auto it = from_file.begin(); it != from_file.end(); ++it)
                config[it.key()] = it.value();
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return heatlab::cli::kExitConfig;
        }
    }
    config["command"] = command;
    config["seed"] = seed;
    config["threads"] = threads;
    config["out"] = out;
    config["format"] = format;
    if (command == "identity-check") {
        config["n"] = opts.n;
        if (opts.has_gamma || !config.contains("gamma")) config["gamma"] = opts.gamma;
    }
    if (command == "dorronsoro") {
        if (opts.has_q || !config.contains("q")) config["q"] = opts.q;
        if (opts.auto_gamma)
            config["gamma"] = "auto";
        else if (opts.has_gamma)
            config["gamma"] = opts.gamma;
        if (opts.ball_samples > 0) config["ball_samples"] = opts.ball_samples;
    }
    if (command == "wasserstein") {
        if (opts.atoms > 0) config["atoms"] = opts.atoms;
        if (opts.directions > 0) config["directions"] = opts.directions;
    }
    if (!opts.space.empty()) {
        // Shorthand kind:dim:p, e.g. lp:2:inf.
        std::string s = opts.space;
        const auto c1 = s.find(':');
        const auto c2 = s.find(':', c1 == std::string::npos ? s.size() : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            std::cerr << "config error: --space expects kind:dim:p\n";
            return heatlab::cli::kExitConfig;
        }
        nlohmann::json sp{{"kind", s.substr(0, c1)},
                          {"dim", std::stoi(s.substr(c1 + 1, c2 - c1 - 1))}};
        const std::string pstr = s.substr(c2 + 1);
        if (pstr == "inf")
            sp["p"] = "inf";
        else
            sp["p"] = std::stod(pstr);
        config["space"] = sp;
    }
    if (!opts.scales.empty()) {
        const auto c1 = opts.scales.find(':');
        const auto c2 = opts.scales.find(':', c1 == std::string::npos ? 0 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            std::cerr << "config error: --scales expects t_min:t_max:points\n";
            return heatlab::cli::kExitConfig;
        }
        config["scales"] = {{"t_min", std::stod(opts.scales.substr(0, c1))},
                            {"t_max", std::stod(opts.scales.substr(c1 + 1, c2 - c1 - 1))},
                            {"points", std::stoi(opts.scales.substr(c2 + 1))}};
    }

    nlohmann::json report;
    const int code = heatlab::cli::run(config, &report);
    if (code == heatlab::cli::kExitOk) std::cout << report.dump(2) << "\n";
    return code;
}
