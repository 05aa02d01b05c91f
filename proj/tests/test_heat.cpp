#include <doctest.h>

#include <cmath>

#include "heatlab/fields.hpp"
#include "heatlab/heat.hpp"
#include "heatlab/quadrature.hpp"

using namespace heatlab;
using namespace heatlab::heat;
using fields::GridField;
using fields::TestFunctionKind;
using fields::TestFunctionSpec;
using spaces::NormedSpace;
using spaces::Vec;

namespace {

GridField gaussian_field(int n, double s, double box, int res) {
    // exp(-|x|^2 / 4s), tails cut far below the comparison tolerance.
    GridField f(n, 1, -box, box, res);
    f.fill([&](const Vec& x, double* out) {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        const double val = std::exp(-r2 / (4.0 * s));
        out[0] = val < 1e-300 ? 0.0 : val;
    });
    return f;
}

GridField bandlimited(int n, std::uint64_t seed, double box = 8.0, int res = 256) {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::RandomBandlimited;
    spec.seed = seed;
    spec.k_min = 1.0;
    spec.k_max = 4.0;
    return fields::make_field(spec, n, -box, box, res);
}

double max_abs_diff(const GridField& a, const GridField& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i)
        m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

}  // namespace

TEST_CASE("heat at t = 0 is the identity") {
    const GridField f = bandlimited(1, 2);
    const Evolute e = heat_convolve(f, 0.0, false);
    CHECK(max_abs_diff(e.values, f) < 1e-12);
}

TEST_CASE("gaussian self-convolution closed form") {
    const double s = 0.5, t = 0.5;
    const GridField f = gaussian_field(1, s, 8.0, 256);
    const Evolute e = heat_convolve(f, t, false);
    const GridField expect = [&] {
        GridField g(1, 1, -8.0, 8.0, 256);
        const double amp = std::sqrt(s / (s + t));
        g.fill([&](const Vec& x, double* out) {
            out[0] = amp * std::exp(-x[0] * x[0] / (4.0 * (s + t)));
        });
        return g;
    }();
    CHECK(max_abs_diff(e.values, expect) < 1e-8);
}

TEST_CASE("semigroup law for heat and poisson") {
    // Multiplier additivity, exact on the spectral side.
    const GridField f = bandlimited(1, 3);
    Spectral spec(f);
    const GridField h2 = spec.apply_radial(
        [](double xi2) { return std::exp(-0.3 * xi2) * std::exp(-0.2 * xi2); });
    const GridField h3 = spec.apply_radial([](double xi2) { return std::exp(-0.5 * xi2); });
    CHECK(max_abs_diff(h2, h3) < 1e-12);

    const GridField p2 = spec.apply_radial([](double xi2) {
        const double xi = std::sqrt(xi2);
        return std::exp(-0.6 * xi) * std::exp(-0.4 * xi);
    });
    const GridField p3 =
        spec.apply_radial([](double xi2) { return std::exp(-1.0 * std::sqrt(xi2)); });
    CHECK(max_abs_diff(p2, p3) < 1e-12);

    // Composition through the grid agrees once the kernel mass stays far from
    // the box edge (hard-zero margins).
    const GridField g = gaussian_field(1, 0.3, 12.0, 256);
    const Evolute g1 = heat_convolve(g, 0.3, false);
    const Evolute g2 = heat_convolve(g1.values, 0.2, false);
    const Evolute g3 = heat_convolve(g, 0.5, false);
    CHECK(max_abs_diff(g2.values, g3.values) < 1e-10);

    const Evolute pid = poisson_convolve(f, 0.0, false);
    CHECK(max_abs_diff(pid.values, f) < 1e-12);
}

TEST_CASE("mass conservation and admissibility errors") {
    const GridField f = gaussian_field(2, 0.3, 10.0, 128);
    const double cell = f.spacing() * f.spacing();
    double m0 = 0.0;
    for (double v : f.values()) m0 += v;
    const Evolute e = heat_convolve(f, 0.4, false);
    double m1 = 0.0;
    for (double v : e.values.values()) m1 += v;
    CHECK(m1 * cell == doctest::Approx(m0 * cell).epsilon(1e-8));

    CHECK_THROWS_AS(heat_convolve(f, 1e9, false), AdmissibilityError);
    CHECK_THROWS_AS(poisson_convolve(f, 1e9, false), AdmissibilityError);
}

TEST_CASE("poisson subordination to the heat semigroup") {
    // P_t f = (2/sqrt(pi)) int_0^inf e^{-w^2} H_{t^2/(4w^2)} f dw, checked on
    // a mean-zero field so the large-s evolutes vanish.
    GridField f = bandlimited(1, 7, 8.0, 256);
    const double t = 0.5;
    const Evolute direct = poisson_convolve(f, t, false);

    Spectral spec(f);
    GridField acc(1, 1, -8.0, 8.0, 256);
    const auto panels = gauss_legendre(15, 0.0, 1.0);
    const double wmin = 0.02, wmax = 6.0;
    const int npanels = 48;
    for (int pnl = 0; pnl < npanels; ++pnl) {
        const double lo = wmin * std::pow(wmax / wmin, static_cast<double>(pnl) / npanels);
        const double hi = wmin * std::pow(wmax / wmin, static_cast<double>(pnl + 1) / npanels);
        for (std::size_t i = 0; i < panels.nodes.size(); ++i) {
            const double w = lo + (hi - lo) * panels.nodes[i];
            const double weight = (hi - lo) * panels.weights[i];
            const double s = t * t / (4.0 * w * w);
            const GridField hs = spec.apply_radial([s](double xi2) { return std::exp(-s * xi2); });
            const double coeff = (2.0 / std::sqrt(M_PI)) * std::exp(-w * w) * weight;
            for (std::size_t k = 0; k < acc.values().size(); ++k)
                acc.values()[k] += coeff * hs.values()[k];
        }
    }
    double scale = 0.0;
    for (double v : f.values()) scale = std::max(scale, std::abs(v));
    CHECK(max_abs_diff(direct.values, acc) < 1e-4 * scale);
}

TEST_CASE("gradient: affine plateau, spectral vs fd refinement, contraction") {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::CoordinateAffine;
    spec.affine_value = {0.0};
    spec.affine_a = {{0.8, -0.5}};
    spec.plateau_radius = 1.2;
    const GridField f = fields::make_field(spec, 2, -6.0, 6.0, 128);
    const GridField g = gradient(f);
    Vec x0{0.0, 0.0};
    std::vector<double> gv(2);
    g.eval(x0, gv.data());
    // Accuracy limited by the window's spectral tail leaking into the plateau.
    CHECK(gv[0] == doctest::Approx(0.8).epsilon(1e-4));
    CHECK(gv[1] == doctest::Approx(-0.5).epsilon(1e-4));

    // Spectral vs central differences: O(h^2) on a smooth bump.
    double err_coarse = 0.0, err_fine = 0.0;
    for (int res : {64, 128}) {
        const GridField b = gaussian_field(1, 0.5, 8.0, res);
        const GridField gs = gradient(b);
        const GridField gf = fd_gradient(b);
        double err = 0.0;
        for (std::size_t p = 1; p + 1 < b.num_points(); ++p)
            err = std::max(err, std::abs(gs.value(p, 0) - gf.value(p, 0)));
        (res == 64 ? err_coarse : err_fine) = err;
    }
    CHECK(err_fine < err_coarse * 0.35);  // one halving of h: factor ~4

    // Convolving with a probability density cannot increase the sup of the
    // gradient.
    const GridField b = gaussian_field(1, 0.5, 8.0, 256);
    const GridField gb = gradient(b);
    const Evolute eb = heat_convolve(b, 0.5, true);
    double g0 = 0.0, g1 = 0.0;
    for (double v : gb.values()) g0 = std::max(g0, std::abs(v));
    for (double v : eb.gradient.values()) g1 = std::max(g1, std::abs(v));
    CHECK(g1 <= g0 * (1.0 + 1e-10));
}

TEST_CASE("spectral evolute agrees with the direct kernel quadrature") {
    const GridField f = gaussian_field(1, 0.4, 10.0, 256);
    const Evolute e = heat_convolve(f, 0.6, false);
    // Compare at grid nodes so no interpolation enters.
    for (std::size_t p : {60U, 128U, 170U}) {
        const Vec x = f.point_coords(p);
        double direct = 0.0;
        direct_heat_quadrature(f, 0.6, x, &direct);
        CHECK(e.values.value(p, 0) == doctest::Approx(direct).epsilon(1e-8));
    }
}

TEST_CASE("heat commutes with the gradient") {
    // Field with spectral content far below the Nyquist floor, so the
    // intermediate grid restriction is lossless.
    const GridField f = gaussian_field(2, 0.4, 8.0, 64);
    const Evolute e = heat_convolve(f, 0.3, true);  // gradient of H_t f
    const GridField gf = gradient(f);
    const Evolute eg = heat_convolve(gf, 0.3, false);  // H_t of gradient
    CHECK(max_abs_diff(e.gradient, eg.values) < 1e-10);
}

TEST_CASE("Lq contraction of the heat semigroup") {
    const GridField f = bandlimited(1, 11, 8.0, 256);
    for (double q : {1.0, 2.0, 4.0}) {
        const double before = f.lq_norm(q);
        for (double t : {0.05, 0.3, 1.5}) {
            const Evolute e = heat_convolve(f, t, false);
            CHECK(e.values.lq_norm(q) <= before * (1.0 + 1e-10));
        }
    }
}

TEST_CASE("Lipschitz contraction up to grid slack") {
    const GridField f = bandlimited(1, 13, 8.0, 256);
    const NormedSpace X = NormedSpace::lp(1, 2.0);
    const double lip = fields::lipschitz_constant(f, X);
    const Evolute e = heat_convolve(f, 0.4, false);
    CHECK(fields::lipschitz_constant(e.values, X) <= lip + 2.0 * f.spacing() * lip);
}

TEST_CASE("taylor_evolute basics") {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::CoordinateAffine;
    spec.affine_value = {0.1};
    spec.affine_a = {{0.6}};
    spec.plateau_radius = 2.5;
    const GridField f = fields::make_field(spec, 1, -10.0, 10.0, 512);

    // On the plateau the evolute of an affine function is itself (the kernel
    // mass stays inside the plateau for small t).
    const AffineMap map = taylor_evolute(f, Vec{0.2}, 0.3, 0.5);
    CHECK(map.value[0] == doctest::Approx(0.1 + 0.6 * 0.2).epsilon(1e-6));
    CHECK(map.linear[0][0] == doctest::Approx(0.6).epsilon(1e-6));

    // t -> 0 recovers f(x).
    const AffineMap tiny = taylor_evolute(f, Vec{0.2}, 1e-7, 0.5);
    CHECK(tiny.value[0] == doctest::Approx(f.eval_scalar({0.2})).epsilon(1e-8));

    // Slope matches the finite-difference slope of the evolute.
    const GridField b = gaussian_field(1, 0.4, 8.0, 512);
    const double t = 0.5, gamma = 0.8;
    const Evolute e = heat_convolve(b, gamma * t * t, true);
    const AffineMap mb = taylor_from_evolute(e, Vec{0.37});
    const double h = b.spacing();
    const double fd =
        (e.values.eval_scalar({0.37 + h}) - e.values.eval_scalar({0.37 - h})) / (2.0 * h);
    CHECK(mb.linear[0][0] == doctest::Approx(fd).epsilon(1e-3));

    CHECK_THROWS_AS(taylor_evolute(f, Vec{100.0}, 0.1, 1.0), std::invalid_argument);
}

TEST_CASE("affine_lip exact cases and vertex enumeration") {
    AffineMap id2;
    id2.base_point = {0.0, 0.0};
    id2.value = {0.0, 0.0};
    id2.linear = {{1.0, 0.0}, {0.0, 1.0}};
    CHECK(affine_lip(id2, NormedSpace::lp(2, 2.0), 2.0, 64, 1) == doctest::Approx(1.0));

    AffineMap diag;
    diag.base_point = {0.0, 0.0};
    diag.value = {0.0, 0.0};
    diag.linear = {{3.0, 0.0}, {0.0, 1.0}};
    CHECK(affine_lip(diag, NormedSpace::lp(2, 2.0), 2.0, 64, 1) == doctest::Approx(3.0));

    AffineMap row;
    row.base_point = {0.0, 0.0};
    row.value = {0.0};
    row.linear = {{1.0, 1.0}};
    CHECK(affine_lip(row, NormedSpace::lp(2, 1.0), 2.0, 64, 1) == doctest::Approx(1.0));
    CHECK(affine_lip(row, NormedSpace::lp(2, 2.0), 2.0, 64, 1) ==
          doctest::Approx(std::sqrt(2.0)));

    // Sampled path (polytope domain) against the known dual value.
    const NormedSpace sq = NormedSpace::polytope(2, {{1.0, 0.0}, {0.0, 1.0}});  // linf ball
    const double sampled = affine_lip(row, sq, 2.0, 512, 7);
    CHECK(sampled == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("evolute_lip_threshold formula and limits") {
    const NormedSpace X = NormedSpace::lp(3, 2.0);
    LipThresholdConstants consts{1.0, 1.0};  // l2: M_1 = b = 1
    const double n = 3.0, L = 5.0, C = 64.0;
    const double got = evolute_lip_threshold(X, Vec{0.0, 0.0, 0.0}, L, C, consts);
    const double want = 1.0 / (C * std::pow(std::sqrt(n) + std::sqrt(std::log(L)), 2.0));
    CHECK(got == doctest::Approx(want).epsilon(1e-12));

    const double near = evolute_lip_threshold(X, Vec{0.0, 0.0, 0.999}, L, C, consts);
    CHECK(near < 1e-5);
    CHECK_THROWS_AS(evolute_lip_threshold(X, Vec{0.0, 0.0, 1.0}, L, C, consts),
                    std::invalid_argument);
}

TEST_CASE("kernel time-derivative L1 norm") {
    const auto one = heat_time_derivative_l1(1, 0.7);
    CHECK(one.closed_form == doctest::Approx(2.0 / std::sqrt(2.0 * M_PI * M_E)).epsilon(1e-12));
    CHECK(one.quadrature == doctest::Approx(one.closed_form).epsilon(1e-9));

    const auto two = heat_time_derivative_l1(2, 0.1);
    CHECK(two.closed_form == doctest::Approx(2.0 / M_E).epsilon(1e-12));
    CHECK(two.quadrature == doctest::Approx(two.closed_form).epsilon(1e-9));

    for (int n = 1; n <= 10; ++n) {
        const auto res = heat_time_derivative_l1(n, 1.0);
        CHECK(std::abs(res.quadrature - res.closed_form) < 1e-8 * res.closed_form);
        const double ratio = res.closed_form / std::sqrt(static_cast<double>(n));
        CHECK(ratio > 0.4);
        CHECK(ratio < 0.8);
    }
}
