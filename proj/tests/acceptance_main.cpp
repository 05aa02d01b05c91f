// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Tolerances are pinned here and match the per-criterion statements
// in the README.

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "heatlab/dorronsoro.hpp"
#include "heatlab/fields.hpp"
#include "heatlab/heat.hpp"
#include "heatlab/lps.hpp"
#include "heatlab/numeric.hpp"
#include "heatlab/spaces.hpp"
#include "heatlab/spectral.hpp"
#include "heatlab/transport.hpp"

using namespace heatlab;
using fields::GridField;
using fields::TestFunctionKind;
using fields::TestFunctionSpec;
using spaces::NormedSpace;
using spaces::Vec;

namespace {

int g_failures = 0;
const int kThreads = 2;

void report(int criterion, bool pass, const std::string& what) {
    std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, what.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c);
    return buf;
}

GridField band(int n, std::uint64_t seed, double kmin, double kmax, double box, int res) {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::RandomBandlimited;
    spec.seed = seed;
    spec.k_min = kmin;
    spec.k_max = kmax;
    spec.modes = 32;
    return fields::make_field(spec, n, -box, box, res);
}

GridField gaussian_derivative_1d(double w, double box, int res) {
    GridField f(1, 1, -box, box, res);
    f.fill([&](const Vec& x, double* out) {
        const double v = -x[0] / (w * w) * std::exp(-x[0] * x[0] / (2.0 * w * w));
        out[0] = std::abs(v) < 1e-290 ? 0.0 : v;
    });
    return f;
}

// --- criterion 1: heat-identity closure ---------------------------------

void criterion_1() {
    bool pass = true;
    double worst1 = 0.0, worst2 = 0.0;
    for (std::uint64_t seed : {11ULL, 23ULL}) {
        const GridField f = band(1, seed, 2.5, 6.0, 8.0, 512);
        dorro::DorroConfig cfg;
        cfg.X = NormedSpace::lp(1, 2.0);
        cfg.q = 2.0;
        cfg.x_stride = 1;
        cfg.ball_samples = 256;
        cfg.threads = kThreads;
        const double gamma = 1.0;  // 1/n and 1 coincide at n = 1
        cfg.scale_grid =
            lps::ScaleGrid(2e-3, 0.98 * std::sqrt(heat::heat_time_limit(f) / gamma), 96);
        const auto rep = spectral::verify_heat_identity(f, gamma, cfg);
        worst1 = std::max(worst1, rep.rel_gap);
        pass = pass && rep.rel_gap <= 0.03;
    }
    for (std::uint64_t seed : {31ULL, 47ULL}) {
        const GridField f = band(2, seed, 1.5, 4.0, 8.0, 256);
        for (double gamma : {0.5, 1.0}) {
            dorro::DorroConfig cfg;
            cfg.X = NormedSpace::lp(2, 2.0);
            cfg.q = 2.0;
            cfg.x_stride = 3;
            cfg.ball_samples = 128;
            cfg.threads = kThreads;
            cfg.scale_grid =
                lps::ScaleGrid(5e-3, 0.98 * std::sqrt(heat::heat_time_limit(f) / gamma), 64);
            const auto rep = spectral::verify_heat_identity(f, gamma, cfg);
            worst2 = std::max(worst2, rep.rel_gap);
            pass = pass && rep.rel_gap <= 0.05;
        }
    }
    report(1, pass,
           fmt("heat-identity closure: worst gap %.4f (n=1, tol 0.03), %.4f (n=2, tol 0.05)",
               worst1, worst2));
}

// --- criteria 2, 3, 11: g-function constants and the J split ------------

std::vector<GridField> three_fields() {
    std::vector<GridField> fs;
    fs.push_back(band(1, 101, 1.5, 6.0, 16.0, 1024));
    fs.push_back(band(1, 202, 2.0, 5.0, 16.0, 1024));
    fs.push_back(gaussian_derivative_1d(0.5, 16.0, 1024));
    return fs;
}

void criterion_2(const std::vector<GridField>& fs) {
    bool pass = true;
    double worst = 0.0;
    const lps::ScaleGrid grid(1e-4, 4.0, 220);
    for (const auto& f : fs) {
        const double ratio = lps::temporal_g(f, 2.0, grid, 2.0, kThreads).value / f.lq_norm(2.0);
        worst = std::max(worst, std::abs(ratio - 0.5) / 0.5);
        pass = pass && std::abs(ratio - 0.5) <= 0.005;
    }
    report(2, pass, fmt("temporal G constant 1/2: worst relative error %.4f (tol 0.01)", worst));
}

void criterion_3(const std::vector<GridField>& fs) {
    bool pass = true;
    double worst = 0.0;
    const double expect = std::sqrt(std::log(4.0 / 3.0));
    const lps::ScaleGrid grid(1e-4, 5.2, 220);
    for (const auto& f : fs) {
        const double ratio =
            lps::difference_g(f, 3.0, 2.0, grid, 2.0, kThreads).value / f.lq_norm(2.0);
        worst = std::max(worst, std::abs(ratio - expect) / expect);
        pass = pass && std::abs(ratio - expect) / expect <= 0.01;
    }
    report(3, pass,
           fmt("Frullani difference constant %.5f: worst relative error %.4f (tol 0.01)", expect,
               worst));
}

void criterion_4() {
    bool pass = true;
    double worst = 0.0;
    for (int n = 1; n <= 10; ++n) {
        const auto res = heat::heat_time_derivative_l1(n, 1.0);
        const double gap = std::abs(res.quadrature - res.closed_form) / res.closed_form;
        worst = std::max(worst, gap);
        pass = pass && gap <= 1e-8;
    }
    const auto one = heat::heat_time_derivative_l1(1, 0.3);
    const auto two = heat::heat_time_derivative_l1(2, 0.3);
    pass = pass && std::abs(one.closed_form - 0.483941) <= 1e-6;
    pass = pass && std::abs(two.closed_form - 0.735759) <= 1e-6;
    report(4, pass,
           fmt("kernel L1 constant: worst quadrature gap %.2e (tol 1e-8); n=1 %.6f, n=2 %.6f",
               worst, one.closed_form, two.closed_form));
}

void criterion_5() {
    GridField d(1, 1, -16.0, 16.0, 1024);
    d.fill([&](const Vec& x, double* out) {
        const double v = std::exp(-x[0] * x[0] / (2.0 * 0.01));
        out[0] = v < 1e-290 ? 0.0 : v;
    });
    heat::Spectral spec(d);
    double sup = 0.0;
    const lps::ScaleGrid grid(1e-4, 4.0, 220);
    for (double t : grid.nodes()) {
        const double st = std::sqrt(t);
        const GridField g = spec.apply_directional(
            Vec{1.0}, [t, st](double xi2) { return st * std::exp(-t * xi2); });
        sup = std::max(sup, g.lq_norm(1.0));
    }
    const double bound = d.lq_norm(1.0) / std::sqrt(M_PI);
    const bool pass = sup <= bound * 1.005 && sup >= bound * 0.98;
    report(5, pass,
           fmt("directional sharp constant: sup/bound = %.4f (needs [0.98, 1.005])", sup / bound));
}

void criterion_6() {
    bool pass = true;
    double worst = 0.0;
    std::uint64_t seed = 600;
    for (double p_norm : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
        for (int n : {2, 4, 8}) {
            for (double p : {1.0, 2.0, 4.0}) {
                const auto space = NormedSpace::lp(n, p_norm);
                const auto res = spaces::gaussian_norm_moment(space, p, 100000, ++seed, kThreads);
                const double sigma =
                    std::hypot(res.monte_carlo.std_error, res.closed_form_std_error);
                const double pulls = std::abs(res.monte_carlo.value - res.closed_form) /
                                     (sigma > 0 ? sigma : 1e-300);
                worst = std::max(worst, pulls);
                pass = pass && pulls <= 3.0;
            }
        }
    }
    report(6, pass, fmt("gaussian moments MC vs closed form: worst pull %.2f sigma (tol 3)", worst));
}

void criterion_7() {
    bool pass = true;
    // Exact equality for l2^n via closed forms.
    double worst_eq = 0.0;
    for (int n : {2, 4, 8}) {
        const auto res = spaces::product_lower_bound(NormedSpace::lp(n, 2.0), 1.0, 2.0, 10, 7);
        worst_eq = std::max(worst_eq, std::abs(res.product - res.bound));
        pass = pass && std::abs(res.product - res.bound) <= 1e-12;
    }
    // 100 random diagonal-weighted spaces.
    Rng rng(700);
    int holds = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform() * 5.0);
        const double p_norm = 1.0 + rng.uniform() * 5.0;
        Vec w(static_cast<std::size_t>(n));
        for (auto& v : w) v = std::exp(rng.uniform(-1.2, 1.2));
        const auto space = NormedSpace::diag_lp(n, p_norm, w);
        const auto res = spaces::product_lower_bound(space, 1.0 + rng.uniform() * 3.0,
                                                     0.5 + rng.uniform() * 3.5, 30000,
                                                     1000 + trial, kThreads);
        if (res.holds_within_3sigma) ++holds;
    }
    pass = pass && holds == 100;
    report(7, pass,
           fmt("product lower bound: l2 equality gap %.1e (tol 1e-12), %.0f/100 random spaces hold",
               worst_eq, static_cast<double>(holds)));
}

void criterion_8() {
    bool pass = true;
    double lo = 1e300, hi = 0.0;
    for (int n : {4, 8, 16, 32, 64}) {
        const auto est = spaces::invariant_M_p(
            NormedSpace::lp(n, std::numeric_limits<double>::infinity()), 1.0, 100000, 800 + n,
            kThreads);
        const double ratio =
            est.value * std::sqrt(static_cast<double>(n)) / std::sqrt(spaces::log_dim(n));
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
        pass = pass && ratio >= 0.3 && ratio <= 3.0;
    }
    report(8, pass, fmt("linf mean-width law: ratios in [%.3f, %.3f] (band [0.3, 3])", lo, hi));
}

void criterion_9() {
    bool pass = true;
    double worst_slope = 0.0, worst_heat = 0.0;
    const std::vector<double> eps = {1e-2, 1e-3, 1e-4};
    for (double gamma : {0.5, 1.0}) {
        const auto scan = spectral::poisson_divergence_scan(1, gamma, eps);
        const double predicted = 2.0 * gamma * gamma;  // gamma^2 * u-weight mass
        const double rel = std::abs(scan.slope - predicted) / predicted;
        worst_slope = std::max(worst_slope, rel);
        pass = pass && scan.slope > 0.0 && rel <= 0.15;
        const double heat_move =
            std::abs(scan.heat_rows[2].value - scan.heat_rows[1].value) / scan.heat_rows[2].value;
        worst_heat = std::max(worst_heat, heat_move);
        pass = pass && heat_move <= 0.01;
    }
    report(9, pass,
           fmt("poisson divergence: worst slope error %.3f (tol 0.15), heat drift %.4f (tol 0.01)",
               worst_slope, worst_heat));
}

void criterion_10() {
    const GridField base = band(1, 77, 1.2, 2.6, 8.0, 1024);
    dorro::DorroConfig cfg;
    cfg.X = NormedSpace::lp(1, 2.0);
    cfg.q = 2.0;
    cfg.gamma = 0.5;
    cfg.x_stride = 1;
    cfg.ball_samples = 256;
    cfg.threads = kThreads;
    cfg.scale_grid = lps::ScaleGrid(4e-3, 1.6, 110);
    const double v0 = dorro::carleson_functional(base, cfg).value;

    bool pass = true;
    double worst = 0.0;
    for (double lambda : {2.0, 4.0}) {
        GridField dil(1, 1, -8.0, 8.0, 1024);
        dil.fill([&](const Vec& x, double* out) {
            out[0] = base.eval_scalar({lambda * x[0]}) / lambda;
        });
        dorro::DorroConfig cfg_dil = cfg;
        cfg_dil.scale_grid = lps::ScaleGrid(4e-3 / lambda, 1.6 / lambda, 110);
        const double v = dorro::carleson_functional(dil, cfg_dil).value;
        const double ratio = v / (std::pow(lambda, -0.5) * v0);
        worst = std::max(worst, std::abs(ratio - 1.0));
        pass = pass && ratio >= 0.98 && ratio <= 1.02;
    }
    report(10, pass,
           fmt("carleson scale invariance: worst |ratio-1| = %.4f (band [0.98, 1.02])", worst));
}

void criterion_11(const std::vector<GridField>& fs) {
    bool pass = true;
    double worst_tri = 0.0;
    dorro::DorroConfig cfg;
    cfg.X = NormedSpace::lp(1, 2.0);
    cfg.q = 2.0;
    cfg.gamma = 0.7;
    cfg.x_stride = 1;
    cfg.ball_samples = 256;
    cfg.threads = kThreads;
    cfg.scale_grid = lps::ScaleGrid(4e-3, 3.9, 110);
    double j2_err = 0.0;
    for (const auto& f : fs) {
        const auto split = dorro::j_split(f, cfg);
        const double slack = (split.total - split.J1 - split.J2) / split.total;
        worst_tri = std::max(worst_tri, slack);
        pass = pass && split.total <= split.J1 + split.J2 + 1e-9 * split.total;
        heat::Spectral spec(f);
        const double expect = std::sqrt(0.7 * std::log(2.0)) * spec.gradient_l2();
        j2_err = std::max(j2_err, std::abs(split.J2 - expect) / expect);
        pass = pass && std::abs(split.J2 - expect) / expect <= 0.02;
    }
    report(11, pass,
           fmt("J split: triangle slack %.1e (<= 1e-9), J2 oracle error %.4f (tol 0.02)",
               worst_tri, j2_err));
}

void criterion_12() {
    const NormedSpace X = NormedSpace::lp(2, 2.0);
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::SmoothedCone;
    spec.cone_space = X;
    const GridField f = fields::make_field(spec, 2, -1.6, 1.6, 128);
    const GridField F = dorro::extend_to_global(f, X, 128);

    const double gamma = 0.5;  // I_2 / (sqrt(n) M) for the euclidean disc
    const double L = 4.0;      // n + 2
    const heat::LipThresholdConstants consts{1.0, 1.0};
    heat::Spectral fspec(F);

    long long candidates = 0, violations = 0;
    std::vector<double> rhos;
    for (int k = 0; k < 24; ++k)
        rhos.push_back(0.004 * std::pow(0.25 / 0.004, static_cast<double>(k) / 23.0));
    for (double rho : rhos) {
        const heat::Evolute ev = heat::heat_convolve(fspec, F, gamma * rho * rho, true);
        for (int i = 0; i < 32; ++i) {
            for (int j = 0; j < 32; ++j) {
                const Vec x{-0.72 + 1.44 * i / 31.0, -0.72 + 1.44 * j / 31.0};
                if (X.norm(x) >= 1.0 - 0.25) continue;
                const double threshold = heat::evolute_lip_threshold(X, x, L, 64.0, consts);
                if (gamma * rho * rho > threshold) continue;
                ++candidates;
                const heat::AffineMap cand = heat::taylor_from_evolute(ev, x);
                if (heat::affine_lip(cand, X, 2.0, 64, 12) > 2.0) ++violations;
            }
        }
    }
    const bool pass = candidates >= 1000 && violations == 0;
    report(12, pass,
           fmt("candidate Lipschitz bound: %.0f candidates below threshold, %.0f violations",
               static_cast<double>(candidates), static_cast<double>(violations)));
}

void criterion_13() {
    const NormedSpace body = NormedSpace::diag_lp(1, 2.0, {2.0});
    const auto hb = transport::half_ball_measures(body, Vec{0.5}, 2000);
    const double quantile = transport::w1_quantile_1d(hb.nu_plus, hb.nu_minus, body);
    const auto flow = transport::w1_flow(hb.nu_plus, hb.nu_minus, body);
    const double path_gap = std::abs(quantile - flow.value);
    const double value_err = std::abs(quantile - 1.0 / 12.0) * 12.0;

    const auto rep = transport::proj_norm_estimate(body, std::sqrt(1.0 / 12.0), 2, 2000, 13);
    const double norm_err = std::abs(rep.proj_norm - 1.0);
    const bool pass = path_gap <= 1e-6 && value_err <= 1e-3 && norm_err <= 1e-3;
    report(13, pass,
           fmt("wasserstein duality n=1: path gap %.1e (tol 1e-6), |proj_norm-1| = %.1e (tol 1e-3)",
               path_gap, norm_err));
}

void criterion_14() {
    const auto rep = lps::pisier_martingale_test(2.0, 1, 8, 10000, 1414, kThreads);
    const bool pass = rep.max_ratio <= 1.0 + 1e-12;
    report(14, pass, fmt("pisier q=2 scalar: max ratio %.12f (tol 1 + 1e-12)", rep.max_ratio));
}

void criterion_15() {
    bool pass = true;

    const GridField f = band(1, 5, 1.5, 5.0, 8.0, 256);
    const lps::ScaleGrid grid(1e-3, 1.9, 48);
    const double t1 = lps::temporal_g(f, 2.0, grid, 2.0, 1).value;
    const double t4 = lps::temporal_g(f, 2.0, grid, 2.0, 4).value;
    pass = pass && t1 == t4;

    dorro::DorroConfig cfg;
    cfg.X = NormedSpace::lp(1, 2.0);
    cfg.q = 2.0;
    cfg.gamma = 0.7;
    cfg.x_stride = 2;
    cfg.ball_samples = 64;
    cfg.scale_grid = lps::ScaleGrid(1e-2, 1.5, 32);
    cfg.threads = 1;
    const double c1 = dorro::carleson_functional(f, cfg).value;
    cfg.threads = 3;
    const double c3 = dorro::carleson_functional(f, cfg).value;
    pass = pass && c1 == c3;

    const auto m1 = spaces::invariant_M_p(NormedSpace::lp(3, 1.0), 2.0, 50000, 15, 1);
    const auto m4 = spaces::invariant_M_p(NormedSpace::lp(3, 1.0), 2.0, 50000, 15, 4);
    pass = pass && m1.value == m4.value && m1.std_error == m4.std_error;

    const auto p1 = lps::pisier_martingale_test(4.0, 4, 8, 2000, 2, 1);
    const auto p4 = lps::pisier_martingale_test(4.0, 4, 8, 2000, 2, 4);
    pass = pass && p1.max_ratio == p4.max_ratio && p1.mean_ratio == p4.mean_ratio;

    report(15, pass, std::string("determinism: numeric payloads byte-identical across 1/3/4 workers"));
}

}  // namespace

int main() {
    std::printf("heatlab acceptance suite\n");
    const auto fs = three_fields();
    criterion_1();
    criterion_2(fs);
    criterion_3(fs);
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11(fs);
    criterion_12();
    criterion_13();
    criterion_14();
    criterion_15();
    if (g_failures == 0)
        std::printf("all 15 criteria passed\n");
    else
        std::printf("%d criteria FAILED\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
