#include "heatlab/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "heatlab/dorronsoro.hpp"
#include "heatlab/fields.hpp"
#include "heatlab/heat.hpp"
#include "heatlab/lps.hpp"
#include "heatlab/spaces.hpp"
#include "heatlab/spectral.hpp"
#include "heatlab/transport.hpp"
#include "heatlab/version.hpp"

namespace heatlab::cli {

namespace {

using nlohmann::json;

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError("config error at " + path + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config error at " + path + "/" + it.key() + ": unknown key");
}

double parse_p(const json& v, const std::string& path) {
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
        throw ConfigError("config error at " + path + ": bad p value '" + s + "'");
    }
    if (!v.is_number()) throw ConfigError("config error at " + path + ": p must be a number or 'inf'");
    return v.get<double>();
}

spaces::NormedSpace parse_space(const json& s, const std::string& path) {
    check_keys(s, path, {"dim", "kind", "p", "weights", "facets", "euclid_scale"});
    if (!s.contains("dim") || !s["dim"].is_number_integer())
        throw ConfigError("config error at " + path + "/dim: required integer");
    const int dim = s["dim"].get<int>();
    const std::string kind = s.value("kind", "lp");
    spaces::NormedSpace space;
    if (kind == "lp") {
        const double p = s.contains("p") ? parse_p(s["p"], path + "/p") : 2.0;
        space = spaces::NormedSpace::lp(dim, p);
    } else if (kind == "diag" || kind == "diagonal-lp") {
        const double p = s.contains("p") ? parse_p(s["p"], path + "/p") : 2.0;
        if (!s.contains("weights"))
            throw ConfigError("config error at " + path + "/weights: required for diagonal kind");
        space = spaces::NormedSpace::diag_lp(dim, p, s["weights"].get<std::vector<double>>());
    } else if (kind == "polytope") {
        if (!s.contains("facets"))
            throw ConfigError("config error at " + path + "/facets: required for polytope kind");
        space = spaces::NormedSpace::polytope(dim, s["facets"].get<std::vector<std::vector<double>>>());
    } else {
        throw ConfigError("config error at " + path + "/kind: unknown kind '" + kind + "'");
    }
    if (s.contains("euclid_scale"))
        space = space.with_euclid_scale(s["euclid_scale"].get<std::vector<std::vector<double>>>());
    return space;
}

fields::GridField parse_field(const json& fspec, int dim, const std::string& path) {
    check_keys(fspec, path,
               {"kind", "dim_out", "box", "res", "width", "center", "cutoff_radius", "seed",
                "k_min", "k_max", "modes", "cone_scale", "mollify", "plateau_radius",
                "affine_value", "affine_a", "import"});
    if (fspec.contains("import")) return fields::load_field(fspec["import"].get<std::string>());
    fields::TestFunctionSpec spec;
    const std::string kind = fspec.value("kind", "gaussian-bump");
    if (kind == "gaussian-bump")
        spec.kind = fields::TestFunctionKind::GaussianBump;
    else if (kind == "smoothed-cone")
        spec.kind = fields::TestFunctionKind::SmoothedCone;
    else if (kind == "random-bandlimited")
        spec.kind = fields::TestFunctionKind::RandomBandlimited;
    else if (kind == "coordinate-affine")
        spec.kind = fields::TestFunctionKind::CoordinateAffine;
    else
        throw ConfigError("config error at " + path + "/kind: unknown kind '" + kind + "'");
    spec.dim_out = fspec.value("dim_out", 1);
    spec.width = fspec.value("width", 1.0);
    spec.cutoff_radius = fspec.value("cutoff_radius", 0.0);
    spec.seed = fspec.value("seed", 1);
    spec.k_min = fspec.value("k_min", 0.5);
    spec.k_max = fspec.value("k_max", 4.0);
    spec.modes = fspec.value("modes", 24);
    spec.cone_scale = fspec.value("cone_scale", 1.0);
    spec.mollify = fspec.value("mollify", 0.0);
    spec.plateau_radius = fspec.value("plateau_radius", 1.0);
    if (fspec.contains("center")) spec.center = fspec["center"].get<std::vector<double>>();
    if (fspec.contains("affine_value"))
        spec.affine_value = fspec["affine_value"].get<std::vector<double>>();
    if (fspec.contains("affine_a"))
        spec.affine_a = fspec["affine_a"].get<std::vector<std::vector<double>>>();
    double a = -8.0, b = 8.0;
    if (fspec.contains("box")) {
        const auto box = fspec["box"].get<std::vector<double>>();
        if (box.size() != 2) throw ConfigError("config error at " + path + "/box: expected [a, b]");
        a = box[0];
        b = box[1];
    }
    const int res = fspec.value("res", 256);
    return fields::make_field(spec, dim, a, b, res);
}

lps::ScaleGrid parse_scales(const json& cfg, const std::string& path) {
    if (!cfg.contains("scales")) return lps::ScaleGrid::per_decade(1e-3, 1.0, 48);
    const json& s = cfg["scales"];
    check_keys(s, path, {"t_min", "t_max", "points"});
    const double tmin = s.value("t_min", 1e-3), tmax = s.value("t_max", 1.0);
    if (!s.contains("points")) return lps::ScaleGrid::per_decade(tmin, tmax, 48);
    return lps::ScaleGrid(tmin, tmax, s["points"].get<int>());
}

json estimate_json(const spaces::InvariantEstimate& e) {
    return json{{"value", e.value},
                {"std_error", e.std_error},
                {"method", e.method},
                {"samples", e.samples},
                {"seed", e.seed}};
}

json report_json(const lps::FunctionalReport& r) {
    json out{{"value", r.value},
             {"discretization_error_estimate", r.discretization_error_estimate},
             {"scale_grid",
              {{"t_min", r.scale_grid.t_min}, {"t_max", r.scale_grid.t_max}, {"points", r.scale_grid.points}}}};
    if (r.bound_value) out["bound_value"] = *r.bound_value;
    if (r.ratio) out["ratio"] = *r.ratio;
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << content;
}

// --- per-command handlers ----------------------------------------------

json run_invariants(const json& cfg) {
    const auto space = parse_space(cfg.at("space"), "/space");
    const long long samples = cfg.value("samples", 100000LL);
    const std::uint64_t seed = cfg.value("seed", 1ULL);
    const int threads = cfg.value("threads", 1);
    std::vector<double> p_list = cfg.value("p_list", std::vector<double>{1.0, 2.0});
    const double q = cfg.value("q", 2.0);

    json out;
    json mp = json::array();
    for (double p : p_list)
        mp.push_back(json{{"p", p}, {"estimate", estimate_json(spaces::invariant_M_p(
                                        space, p, samples, seed, threads))}});
    out["M_p"] = mp;
    out["I_q"] = estimate_json(spaces::invariant_I_q(space, q, samples, seed + 1, threads));
    out["b"] = estimate_json(spaces::invariant_b(space, 64, seed + 2));
    out["volume"] = estimate_json(spaces::ball_volume(space, samples, seed + 3, threads));
    const auto plb = spaces::product_lower_bound(space, 1.0, q, samples, seed + 4, threads);
    out["product_lower_bound"] = json{{"product", plb.product},
                                      {"bound", plb.bound},
                                      {"holds_within_3sigma", plb.holds_within_3sigma}};
    const auto gm = spaces::gaussian_norm_moment(space, 2.0, samples, seed + 5, threads);
    out["gaussian_moment_p2"] = json{{"monte_carlo", estimate_json(gm.monte_carlo)},
                                     {"closed_form", gm.closed_form},
                                     {"closed_form_std_error", gm.closed_form_std_error}};
    return out;
}

json run_evolute(const json& cfg, const std::filesystem::path& outdir) {
    const int dim = cfg.value("dim", 1);
    const auto f = parse_field(cfg.at("field"), dim, "/field");
    const double t = cfg.value("t", 0.25);
    const std::string kind = cfg.value("kind", "heat");
    heat::Evolute ev = kind == "poisson" ? heat::poisson_convolve(f, t)
                                         : heat::heat_convolve(f, t);
    const auto path = outdir / "evolute.gfld";
    fields::save_field(ev.values, path.string());
    {
        std::ifstream is(path.string() + ".json");
        json sidecar = json::parse(is);
        sidecar["semigroup"] = kind;
        sidecar["t"] = t;
        write_text(path.string() + ".json", sidecar.dump(2) + "\n");
    }
    json out{{"t", t},
             {"kind", kind},
             {"field_l2", f.lq_norm(2.0)},
             {"evolute_l2", ev.values.lq_norm(2.0)},
             {"export", path.string()}};
    return out;
}

json run_gfunction(const json& cfg, const std::filesystem::path& outdir) {
    const int dim = cfg.value("dim", 1);
    const auto f = parse_field(cfg.at("field"), dim, "/field");
    const double q = cfg.value("q", 2.0);
    const int threads = cfg.value("threads", 1);
    const auto grid = parse_scales(cfg, "/scales");
    const std::string functional = cfg.value("functional", "temporal");

    json out;
    std::ostringstream csv;
    csv << "functional,q,param,value,error_estimate,bound,ratio\n";
    auto emit = [&](const std::string& name, double param, const lps::FunctionalReport& rep) {
        out[name] = report_json(rep);
        csv << name << "," << q << "," << param << "," << rep.value << ","
            << rep.discretization_error_estimate << "," << (rep.bound_value ? *rep.bound_value : 0.0)
            << "," << (rep.ratio ? *rep.ratio : 0.0) << "\n";
    };
    if (functional == "temporal") {
        emit("temporal", 0.0, lps::temporal_g(f, q, grid, 2.0, threads));
    } else if (functional == "difference") {
        const double alpha = cfg.value("alpha", 3.0);
        emit("difference", alpha, lps::difference_g(f, alpha, q, grid, 2.0, threads));
    } else if (functional == "directional") {
        std::vector<double> z = cfg.value("z", std::vector<double>{});
        if (z.empty()) z.assign(static_cast<std::size_t>(dim), 0.0), z[0] = 1.0;
        const auto rep = lps::directional_g(f, z, q, grid, 2.0, threads);
        emit("directional", z[0], rep.functional);
        out["single_t_sup"] = rep.single_t_sup;
        out["single_t_bound"] = rep.single_t_bound;
    } else if (functional == "spatial-div") {
        emit("spatial-div", 0.0, lps::spatial_div_g(f, q, grid, 64, cfg.value("seed", 17ULL), threads));
    } else {
        throw ConfigError("config error at /functional: unknown functional '" + functional + "'");
    }
    write_text(outdir / "gfunction.csv", csv.str());
    return out;
}

dorro::DorroConfig make_dorro_config(const json& cfg, int dim) {
    dorro::DorroConfig dc;
    dc.X = cfg.contains("space") ? parse_space(cfg["space"], "/space")
                                 : spaces::NormedSpace::lp(dim, 2.0);
    dc.q = cfg.value("q", 2.0);
    if (cfg.contains("gamma")) {
        const json& g = cfg["gamma"];
        if (g.is_string() && g.get<std::string>() == "auto")
            dc.gamma.reset();
        else
            dc.gamma = g.get<double>();
    }
    dc.x_stride = cfg.value("x_stride", 2);
    dc.scale_grid = parse_scales(cfg, "/scales");
    dc.ball_samples = cfg.value("ball_samples", 256);
    dc.seed = cfg.value("seed", 11ULL);
    dc.threads = cfg.value("threads", 1);
    return dc;
}

json run_dorronsoro(const json& cfg, const std::filesystem::path& outdir) {
    const int dim = cfg.value("dim", 1);
    const auto f = parse_field(cfg.at("field"), dim, "/field");
    dorro::DorroConfig dc = make_dorro_config(cfg, dim);
    const auto rep = dorro::carleson_functional(f, dc);
    const auto split = dorro::j_split(f, dc);

    std::ostringstream csv;
    csv << "t,contribution\n";
    for (const auto& [t, c] : rep.per_scale) csv << t << "," << c << "\n";
    write_text(outdir / "dorronsoro_scales.csv", csv.str());

    json out = report_json(rep);
    out["gamma"] = rep.gamma;
    out["j_split"] = json{{"total", split.total}, {"J1", split.J1}, {"J2", split.J2}};
    out["triangle_holds"] = split.total <= split.J1 + split.J2 + 1e-9 * split.total;
    return out;
}

json run_local(const json& cfg, const std::filesystem::path&) {
    const int dim = cfg.value("dim", 1);
    const auto f = parse_field(cfg.at("field"), dim, "/field");
    dorro::DorroConfig dc = make_dorro_config(cfg, dim);
    const double T = cfg.contains("T") ? cfg["T"].get<double>()
                                       : dorro::local_scale_T(dc.q, dim, dc.X, 200000, dc.seed);
    const double r = cfg.contains("r") ? cfg["r"].get<double>() : T * T;
    const auto rep = dorro::local_functional(f, dc, r, T);
    return json{{"value", rep.value},     {"bound", rep.bound},
                {"ratio", rep.ratio},     {"gamma", rep.gamma},
                {"T", rep.T},             {"r", r},
                {"candidates", rep.candidates}, {"lip_violations", rep.lip_violations}};
}

json run_spectral(const json& cfg, const std::filesystem::path& outdir) {
    std::vector<int> n_list = cfg.value("n_list", std::vector<int>{1, 2});
    std::vector<double> gamma_list = cfg.value("gamma_list", std::vector<double>{0.5, 1.0});
    std::ostringstream csv;
    csv << "n,gamma,k,bound,ratio\n";
    json table = json::array();
    for (int n : n_list)
        for (double g : gamma_list) {
            const auto rep = spectral::k_constant(n, g);
            csv << n << "," << g << "," << rep.k_value << "," << rep.bound_rhs << "," << rep.ratio
                << "\n";
            table.push_back(json{{"n", n},
                                 {"gamma", g},
                                 {"k", rep.k_value},
                                 {"quadrature_error", rep.quadrature_error},
                                 {"bound", rep.bound_rhs},
                                 {"ratio", rep.ratio}});
        }
    write_text(outdir / "spectral_k.csv", csv.str());

    json out{{"k_table", table}};
    if (cfg.contains("epsilons")) {
        const auto eps = cfg["epsilons"].get<std::vector<double>>();
        const int n = n_list.empty() ? 1 : n_list.front();
        const double g = gamma_list.empty() ? 1.0 : gamma_list.front();
        const auto scan = spectral::poisson_divergence_scan(n, g, eps);
        std::ostringstream dcsv;
        dcsv << "epsilon,value,heat_value\n";
        json rows = json::array();
        for (std::size_t i = 0; i < scan.rows.size(); ++i) {
            dcsv << scan.rows[i].epsilon << "," << scan.rows[i].value << ","
                 << scan.heat_rows[i].value << "\n";
            rows.push_back(json{{"epsilon", scan.rows[i].epsilon},
                                {"value", scan.rows[i].value},
                                {"heat_value", scan.heat_rows[i].value}});
        }
        write_text(outdir / "spectral_divergence.csv", dcsv.str());
        out["divergence"] = json{{"rows", rows},
                                 {"slope", scan.slope},
                                 {"predicted_slope", scan.predicted_slope},
                                 {"fit_residual", scan.fit_residual}};
    }
    return out;
}

json run_wasserstein(const json& cfg, const std::filesystem::path&) {
    const auto space = parse_space(cfg.at("space"), "/space");
    const long long samples = cfg.value("samples", 100000LL);
    const std::uint64_t seed = cfg.value("seed", 1ULL);
    const int threads = cfg.value("threads", 1);
    const auto iso = spaces::isotropic_normalize(space, samples, seed, threads);
    const int atoms = cfg.value("atoms", 400);
    const int dirs = cfg.value("directions", 64);
    const auto rep = transport::proj_norm_estimate(iso.body, iso.L_X, dirs, atoms, seed, threads);
    json rows = json::array();
    for (const auto& row : rep.rows)
        rows.push_back(json{{"x", row.x}, {"w1", row.w1_nu}, {"ratio", row.symmetry_ratio}});
    return json{{"proj_norm", rep.proj_norm},
                {"L_X", iso.L_X},
                {"atoms_used", rep.atoms_used},
                {"per_direction", rows}};
}

json run_identity_check(const json& cfg, const std::filesystem::path&) {
    const int n = cfg.value("n", 1);
    const double gamma = cfg.value("gamma", 1.0);
    const int res = cfg.value("res", n == 1 ? 512 : 256);
    json fspec = cfg.contains("field") ? cfg["field"] : json::object();
    if (!fspec.contains("kind")) fspec["kind"] = "random-bandlimited";
    if (!fspec.contains("seed")) fspec["seed"] = cfg.value("seed", 3ULL);
    if (!fspec.contains("k_min")) fspec["k_min"] = 2.0;
    if (!fspec.contains("k_max")) fspec["k_max"] = 5.0;
    if (!fspec.contains("box")) fspec["box"] = {-8.0, 8.0};
    fspec["res"] = res;
    const auto f = parse_field(fspec, n, "/field");

    dorro::DorroConfig dc = make_dorro_config(cfg, n);
    dc.X = spaces::NormedSpace::lp(n, 2.0);
    dc.q = 2.0;
    if (!cfg.contains("scales")) {
        const double tmax = 0.98 * std::sqrt(heat::heat_time_limit(f) / gamma);
        dc.scale_grid = lps::ScaleGrid(2e-3, tmax, 96);
    }
    dc.x_stride = cfg.value("x_stride", n == 1 ? 1 : 2);
    const auto rep = spectral::verify_heat_identity(f, gamma, dc);
    return json{{"n", n},
                {"gamma", gamma},
                {"lhs", rep.lhs},
                {"rhs", rep.rhs},
                {"rel_gap", rep.rel_gap},
                {"k", rep.k_value}};
}

const std::set<std::string> kCommonKeys = {"command", "seed", "threads", "out", "format",
                                           "timestamp_field"};

void validate_command_config(const json& cfg) {
    static const std::map<std::string, std::set<std::string>> allowed = {
        {"invariants", {"space", "samples", "p_list", "q"}},
        {"evolute", {"field", "dim", "t", "kind"}},
        {"gfunction", {"field", "dim", "q", "scales", "functional", "alpha", "z"}},
        {"dorronsoro",
         {"field", "dim", "space", "q", "gamma", "scales", "ball_samples", "x_stride"}},
        {"local",
         {"field", "dim", "space", "q", "gamma", "scales", "ball_samples", "x_stride", "r", "T"}},
        {"spectral", {"n_list", "gamma_list", "epsilons"}},
        {"wasserstein", {"space", "samples", "atoms", "directions"}},
        {"identity-check",
         {"field", "n", "gamma", "res", "space", "q", "scales", "ball_samples", "x_stride"}},
    };
    if (!cfg.contains("command") || !cfg["command"].is_string())
        throw ConfigError("config error at /command: required string");
    const std::string cmd = cfg["command"].get<std::string>();
    auto it = allowed.find(cmd);
    if (it == allowed.end()) throw ConfigError("config error at /command: unknown command '" + cmd + "'");
    std::set<std::string> keys = kCommonKeys;
    keys.insert(it->second.begin(), it->second.end());
    check_keys(cfg, "", keys);
}

}  // namespace

nlohmann::json default_config(const std::string& command) {
    json cfg{{"command", command}, {"seed", 1}, {"threads", 1}, {"out", "out"}, {"format", "json"}};
    if (command == "identity-check") {
        cfg["n"] = 1;
        cfg["gamma"] = 1.0;
    }
    return cfg;
}

int run(const nlohmann::json& config, nlohmann::json* report) {
    json resolved = config;
    try {
        validate_command_config(resolved);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    }

    const std::string command = resolved["command"].get<std::string>();
    const std::filesystem::path outdir = resolved.value("out", std::string("out"));
    try {
        std::filesystem::create_directories(outdir);

        json result;
        if (command == "invariants")
            result = run_invariants(resolved);
        else if (command == "evolute")
            result = run_evolute(resolved, outdir);
        else if (command == "gfunction")
            result = run_gfunction(resolved, outdir);
        else if (command == "dorronsoro")
            result = run_dorronsoro(resolved, outdir);
        else if (command == "local")
            result = run_local(resolved, outdir);
        else if (command == "spectral")
            result = run_spectral(resolved, outdir);
        else if (command == "wasserstein")
            result = run_wasserstein(resolved, outdir);
        else if (command == "identity-check")
            result = run_identity_check(resolved, outdir);

        json full{{"artifact_version", kArtifactVersion},
                  {"command", command},
                  {"config", resolved},
                  {"result", result}};
        const bool with_timestamp = resolved.value("timestamp_field", true);
        if (with_timestamp) {
            const auto now = std::chrono::system_clock::now().time_since_epoch();
            full["timestamp"] =
                std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
        }
        write_text(outdir / (command + ".json"), full.dump(2) + "\n");
        if (report) *report = full;
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const heat::AdmissibilityError& e) {
        std::cerr << "admissibility error: " << e.what() << "\n";
        return kExitAdmissibility;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

}  // namespace heatlab::cli
