#include <doctest.h>

#include <cmath>

#include "heatlab/dorronsoro.hpp"
#include "heatlab/spectral.hpp"

using namespace heatlab;
using namespace heatlab::dorro;
using fields::GridField;
using fields::TestFunctionKind;
using fields::TestFunctionSpec;
using spaces::NormedSpace;
using spaces::Vec;

namespace {

GridField band_field_1d(std::uint64_t seed, double kmin = 3.0, double kmax = 6.0) {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::RandomBandlimited;
    spec.seed = seed;
    spec.k_min = kmin;
    spec.k_max = kmax;
    spec.modes = 32;
    return fields::make_field(spec, 1, -16.0, 16.0, 1024);
}

DorroConfig config_1d() {
    DorroConfig cfg;
    cfg.X = NormedSpace::lp(1, 2.0);
    cfg.q = 2.0;
    cfg.x_stride = 1;
    cfg.scale_grid = lps::ScaleGrid(4e-3, 3.9, 110);
    cfg.ball_samples = 256;
    cfg.threads = 2;
    return cfg;
}

}  // namespace

TEST_CASE("ball point sets are uniform quadratures of the ball") {
    // Midpoints in 1-d: second moment of [-1,1] to high order.
    const auto z1 = ball_point_set(NormedSpace::lp(1, 2.0), 256, 1);
    double m2 = 0.0;
    for (const auto& z : z1) m2 += z[0] * z[0];
    CHECK(m2 / z1.size() == doctest::Approx(1.0 / 3.0).epsilon(1e-4));

    // Fibonacci disc: |z|^2 averages to 1/2.
    const auto z2 = ball_point_set(NormedSpace::lp(2, 2.0), 512, 1);
    double d2 = 0.0;
    for (const auto& z : z2) d2 += z[0] * z[0] + z[1] * z[1];
    CHECK(d2 / z2.size() == doctest::Approx(0.5).epsilon(1e-3));
    for (const auto& z : z2) CHECK(std::hypot(z[0], z[1]) <= 1.0 + 1e-12);

    // Halton cube covers [-1,1]^2 evenly.
    const auto zc = ball_point_set(NormedSpace::lp(2, std::numeric_limits<double>::infinity()),
                                   512, 1);
    double c2 = 0.0;
    for (const auto& z : zc) c2 += z[0] * z[0];
    CHECK(c2 / zc.size() == doctest::Approx(1.0 / 3.0).epsilon(0.01));
}

TEST_CASE("carleson functional vanishes where the field is affine") {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::CoordinateAffine;
    spec.affine_value = {0.2};
    spec.affine_a = {{0.9}};
    spec.plateau_radius = 6.0;
    const GridField f = fields::make_field(spec, 1, -16.0, 16.0, 1024);

    DorroConfig cfg = config_1d();
    cfg.gamma = 0.45;
    cfg.scale_grid = lps::ScaleGrid(1e-2, 0.5, 48);
    cfg.x_window = {{-2.0, 2.0}};  // sampled balls stay inside the plateau
    const auto rep = carleson_functional(f, cfg);
    CHECK(rep.value < 1e-6);
}

TEST_CASE("carleson functional matches the spectral identity prediction (n = 1)") {
    for (double gamma : {1.0, 0.5}) {
        const GridField f = band_field_1d(31);
        DorroConfig cfg = config_1d();
        cfg.scale_grid = lps::ScaleGrid(4e-3, 0.98 * std::sqrt(heat::heat_time_limit(f) / gamma), 110);
        const auto rep = spectral::verify_heat_identity(f, gamma, cfg);
        CHECK(rep.rel_gap < 0.03);
    }
}

TEST_CASE("carleson dilation covariance") {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::RandomBandlimited;
    spec.seed = 77;
    spec.k_min = 1.5;
    spec.k_max = 3.0;
    spec.modes = 24;
    const GridField base = fields::make_field(spec, 1, -8.0, 8.0, 1024);

    const double lambda = 2.0;
    GridField dil(1, 1, -8.0, 8.0, 1024);
    dil.fill([&](const Vec& x, double* out) { out[0] = base.eval_scalar({lambda * x[0]}) / lambda; });

    DorroConfig cfg = config_1d();
    cfg.gamma = 0.5;
    cfg.scale_grid = lps::ScaleGrid(4e-3, 1.6, 110);
    const auto rep_base = carleson_functional(base, cfg);

    DorroConfig cfg_dil = cfg;
    cfg_dil.scale_grid = lps::ScaleGrid(4e-3 / lambda, 1.6 / lambda, 110);
    const auto rep_dil = carleson_functional(dil, cfg_dil);

    const double expected = std::pow(lambda, -1.0 / cfg.q) * rep_base.value;
    CHECK(rep_dil.value / expected == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("j_split: triangle inequality and the J2 Plancherel oracle") {
    const GridField f = band_field_1d(55, 3.0, 6.0);
    DorroConfig cfg = config_1d();
    cfg.gamma = 0.7;
    const auto split = j_split(f, cfg);

    CHECK(split.total <= split.J1 + split.J2 + 1e-9 * split.total);

    heat::Spectral spec(f);
    const double expect_J2 = std::sqrt(cfg.gamma.value() * std::log(2.0)) * spec.gradient_l2();
    CHECK(split.J2 == doctest::Approx(expect_J2).epsilon(0.02));
}

TEST_CASE("j_split on an affine plateau is negligible") {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::CoordinateAffine;
    spec.affine_value = {0.0};
    spec.affine_a = {{0.8}};
    spec.plateau_radius = 6.0;
    const GridField f = fields::make_field(spec, 1, -16.0, 16.0, 1024);
    DorroConfig cfg = config_1d();
    cfg.gamma = 0.45;
    cfg.scale_grid = lps::ScaleGrid(1e-2, 0.5, 48);
    cfg.x_window = {{-2.0, 2.0}};
    const auto split = j_split(f, cfg);
    CHECK(split.J1 < 1e-6);
    CHECK(split.J2 < 1e-6);
}

TEST_CASE("optimal_gamma: proof moments, closed form, homogeneity") {
    // Feeding the substituted moments of the Lipschitz-case proof reproduces
    // gamma = I_q / (sqrt(n) M).
    for (auto X : {NormedSpace::lp(2, 1.0), NormedSpace::lp(2, 2.0),
                   NormedSpace::lp(3, std::numeric_limits<double>::infinity())}) {
        const double q = 2.0;
        const double gamma = optimal_gamma_from_moments(
            X, q, [](const Vec&) { return 1.0; },
            [&](const Vec& sigma) { return X.norm(sigma); }, 400000, 400000, 9);
        const double Iq = spaces::invariant_I_q(X, q, 400000, 10).value;
        const double M = spaces::invariant_M_p(X, 1.0, 400000, 11).value;
        const double expect = Iq / (std::sqrt(static_cast<double>(X.dim())) * M);
        CHECK(gamma == doctest::Approx(expect).epsilon(0.01));
    }

    // n = 1 scalar: gamma(f) = sqrt(1/5) independently of f.
    const GridField f = band_field_1d(21);
    DorroConfig cfg = config_1d();
    const double g1 = optimal_gamma(f, cfg);
    CHECK(g1 == doctest::Approx(std::sqrt(0.2)).epsilon(0.02));

    // Scaling f leaves gamma unchanged (identical samples cancel exactly).
    GridField f2 = f;
    for (auto& v : f2.values()) v *= 3.7;
    CHECK(optimal_gamma(f2, cfg) == doctest::Approx(g1).epsilon(1e-12));

    GridField zero(1, 1, -8.0, 8.0, 64);
    CHECK_THROWS_AS(optimal_gamma(zero, cfg), std::invalid_argument);
}

TEST_CASE("K_constant closed forms and guards") {
    for (int n : {1, 2, 5}) {
        const double K = K_constant(2.0, n, NormedSpace::lp(n, 2.0), 1.0, 1.0);
        const double expect = std::pow(n, 0.25) * std::pow(n / (n + 2.0), 0.25);
        CHECK(K == doctest::Approx(expect).epsilon(1e-10));
    }

    // n = 1: I_q M >= 1/2 guard.
    for (double q : {2.0, 3.0}) {
        const NormedSpace X = NormedSpace::lp(1, 2.0);
        const double Iq = spaces::invariant_I_q(X, q, 1000, 1).value;
        const double M = spaces::invariant_M_p(X, 1.0, 1000, 2).value;
        CHECK(Iq * M >= 0.5);
        CHECK(Iq * M == doctest::Approx(std::pow(1.0 / (1.0 + q), 1.0 / q)).epsilon(1e-10));
    }

    CHECK(K_constant(2.0, 2, NormedSpace::lp(2, 2.0), 1.0, 2.0) ==
          doctest::Approx(2.0 * K_constant(2.0, 2, NormedSpace::lp(2, 2.0), 1.0, 1.0))
              .epsilon(1e-12));
    CHECK_THROWS_AS(K_constant(2.0, 2, NormedSpace::lp(2, 2.0), 1.0, 0.0),
                    std::invalid_argument);
}

TEST_CASE("extend_to_global: zero, support mask, Lipschitz bound") {
    const NormedSpace X = NormedSpace::lp(2, 2.0);

    GridField zero(2, 1, -1.5, 1.5, 64);
    const GridField Fz = extend_to_global(zero, X, 64);
    for (double v : Fz.values()) CHECK(v == 0.0);

    // f = ||x||_X / 2 on B_X.
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::SmoothedCone;
    spec.cone_space = X;
    const GridField cone = fields::make_field(spec, 2, -1.6, 1.6, 128);
    GridField half(2, 1, -1.6, 1.6, 128);
    half.fill([&](const Vec& x, double* out) { out[0] = 0.5 * X.norm(x); });
    const GridField F = extend_to_global(half, X, 128);

    const int n = 2;
    for (std::size_t p = 0; p < F.num_points(); ++p) {
        if (F.value(p, 0) == 0.0) continue;
        const Vec x = F.point_coords(p);
        CHECK(X.norm(x) <= (1.0 + 1.0 / n) + 2.0 * F.spacing());
    }
    const double lip = fields::lipschitz_constant(F, X);
    CHECK(lip <= (n + 2.0) * (1.0 + 20.0 * F.spacing()));

    // The smoothed cone stays 1-Lipschitz after extension up to slack.
    const GridField Fc = extend_to_global(cone, X, 128);
    CHECK(fields::lipschitz_constant(Fc, X) <= (n + 2.0) * (1.0 + 20.0 * Fc.spacing()));
}

TEST_CASE("local_functional: affine input, lip safety, min-accumulator") {
    const NormedSpace X = NormedSpace::lp(1, 2.0);

    // Affine 1-Lipschitz input: tiny local value.
    GridField aff(1, 1, -1.4, 1.4, 256);
    aff.fill([&](const Vec& x, double* out) { out[0] = 0.9 * x[0] + 0.05; });
    DorroConfig cfg;
    cfg.X = X;
    cfg.q = 2.0;
    cfg.x_stride = 4;
    cfg.scale_grid = lps::ScaleGrid(1e-3, 1.0, 20);
    cfg.ball_samples = 96;
    cfg.threads = 2;
    const double T = local_scale_T(2.0, 1, X);
    CHECK(T <= 0.5);
    const auto rep = local_functional(aff, cfg, T * T, T);
    CHECK(rep.value < 1e-3);
    CHECK(rep.lip_violations == 0);
    CHECK(rep.candidates > 0);

    // A genuinely nonaffine input sits well above the affine floor and below
    // the (9Kn)^q bound scale.
    GridField curve(1, 1, -1.4, 1.4, 256);
    curve.fill([&](const Vec& x, double* out) { out[0] = std::cos(3.0 * x[0]) / 3.0; });
    const auto rep2 = local_functional(curve, cfg, T * T, T);
    CHECK(rep2.value > 100.0 * rep.value);
    CHECK(rep2.lip_violations == 0);
    CHECK(rep2.ratio <= 1.0);

    // Adding the least-squares candidate can only lower the min-accumulator.
    DorroConfig cfg_ls = cfg;
    cfg_ls.least_squares_candidate = true;
    const auto rep3 = local_functional(curve, cfg_ls, T * T, T);
    CHECK(rep3.value <= rep2.value + 1e-12);
    CHECK(rep3.used_least_squares);

    CHECK_THROWS_AS(local_functional(aff, cfg, T, 0.6), std::invalid_argument);
    CHECK_THROWS_AS(local_functional(aff, cfg, 2.0 * T * T, T), std::invalid_argument);
}

TEST_CASE("affine_search: affine hit at the top scale, smoothed |x|, upgrade stat") {
    const NormedSpace X = NormedSpace::lp(1, 2.0);
    DorroConfig cfg;
    cfg.X = X;
    cfg.q = 2.0;
    cfg.x_stride = 4;
    cfg.scale_grid = lps::ScaleGrid(1e-3, 1.0, 16);
    cfg.ball_samples = 96;
    cfg.threads = 2;

    GridField aff(1, 1, -1.4, 1.4, 256);
    aff.fill([&](const Vec& x, double* out) { out[0] = 0.8 * x[0]; });
    const auto hit = affine_search(aff, 0.25, 2.0, cfg);
    CHECK(hit.hit);
    const double T = local_scale_T(2.0, 1, X);
    CHECK(hit.rho == doctest::Approx(T).epsilon(1e-9));
    // The extension's kinks at the ball boundary contaminate the top scale at
    // the kernel-tail level; the hit is still immediate.
    CHECK(hit.linf_error < 0.1);
    CHECK(hit.lip_of_map <= 2.0);

    // Smoothed absolute value: a hit at a scale bounded away from the floor.
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::SmoothedCone;
    spec.cone_space = X;
    const GridField vee = fields::make_field(spec, 1, -1.6, 1.6, 256);
    const auto res = affine_search(vee, 0.25, 2.0, cfg);
    CHECK(res.hit);
    CHECK(res.rho >= 8.0 * vee.spacing());
    CHECK(res.linf_error <= 0.25);
    CHECK(res.lip_of_map <= 2.0);
    CHECK(res.upgrade_constant >= 0.0);
    CHECK(std::isfinite(res.upgrade_constant));

    CHECK_THROWS_AS(affine_search(aff, 0.9, 2.0, cfg), std::invalid_argument);
}
