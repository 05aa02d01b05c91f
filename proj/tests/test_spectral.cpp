#include <doctest.h>

#include <cmath>

#include "heatlab/spectral.hpp"

using namespace heatlab;
using namespace heatlab::spectral;

TEST_CASE("k_constant: mesh stability and the Bessel-form oracle") {
    for (int n : {1, 2, 4}) {
        for (double gamma : {0.1, 0.5, 1.0, 10.0}) {
            const KReport rep = k_constant(n, gamma);
            CHECK(rep.k_value > 0.0);
            CHECK(rep.quadrature_error < 1e-6 * rep.k_value);
            const double oracle = k_constant_bessel_oracle(n, gamma);
            CHECK(rep.k_value == doctest::Approx(oracle).epsilon(1e-8));
        }
    }
}

TEST_CASE("k_constant diverges at both ends of the gamma scan") {
    std::vector<double> ks;
    double kmin = 1e300;
    for (double g : {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3}) {
        const double k = k_constant(1, g).k_value;
        ks.push_back(k);
        kmin = std::min(kmin, k);
    }
    // Linear growth (gamma n term) on the right; logarithmic growth on the
    // left, so the measured factor there is ~6x over this scan.
    CHECK(ks.front() >= 5.0 * kmin);
    CHECK(ks.back() >= 10.0 * kmin);
    CHECK(ks.front() > ks[2]);
    CHECK(ks[1] > ks[2]);
}

TEST_CASE("k integrand at u = 0 reduces to the gaussian-only residual") {
    // |e^{isu} - (1+isu) e^{-g s^2}|^2 at u = 0 is (1 - e^{-g s^2})^2.
    const double g = 0.7;
    for (double s : {0.3, 1.0, 2.5}) {
        const double E = std::exp(-g * s * s);
        const double re = std::cos(0.0) - E;
        const double im = std::sin(0.0) - 0.0 * E;
        CHECK(re * re + im * im == doctest::Approx((1.0 - E) * (1.0 - E)).epsilon(1e-15));
    }
}

TEST_CASE("k_bound_rhs asymptotics and sanity band") {
    // gamma n -> infinity: dominated by the gamma n term.
    const double big = k_bound_rhs(1, 1e3);
    CHECK(big / 1e3 == doctest::Approx(1.0).epsilon(0.10));

    const double unit = k_bound_rhs(1, 1.0);
    CHECK(unit >= std::sqrt(M_PI) / 4.0 * std::log(2.0) + 1.0);
    CHECK(unit <= 10.0);

    CHECK_THROWS_AS(k_bound_rhs(1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(k_constant(1, 0.0), std::invalid_argument);
}

TEST_CASE("k over bound ratio is uniformly bounded on the scan") {
    // Empirical universal constant, frozen after the first scan (measured
    // worst case 1.438 at n = 10, gamma = 1e-3).
    const double C_k = 1.50;
    double worst = 0.0;
    for (int n : {1, 2, 4, 10}) {
        for (double g : {1e-3, 1e-2, 0.1, 1.0, 10.0, 1e2, 1e3}) {
            const KReport rep = k_constant(n, g);
            worst = std::max(worst, rep.ratio);
            CHECK(rep.ratio <= C_k);
        }
    }
    CHECK(worst > 0.05);  // the scan actually exercises the bound
}

TEST_CASE("gamma-ratio prefactor equals the surface/volume constant") {
    for (int n : {1, 2, 3, 7}) {
        const double from_volumes =
            n * spaces::euclidean_ball_volume(n - 1 >= 1 ? n - 1 : 0) /
            spaces::euclidean_ball_volume(n);
        // |B^0| = 1 handled by euclidean_ball_volume(0) = 1.
        CHECK(k_prefactor(n) == doctest::Approx(from_volumes).epsilon(1e-12));
    }
}

TEST_CASE("poisson divergence scan: log slope, gamma scaling, heat contrast") {
    const std::vector<double> eps = {1e-2, 1e-3, 1e-4};
    const auto scan1 = poisson_divergence_scan(1, 1.0, eps);
    CHECK(scan1.slope > 0.0);
    CHECK(scan1.predicted_slope == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(scan1.slope == doctest::Approx(scan1.predicted_slope).epsilon(0.15));
    CHECK(scan1.fit_residual <= 0.10);

    const auto scan2 = poisson_divergence_scan(1, 2.0, eps);
    CHECK(scan2.slope == doctest::Approx(4.0 * scan1.slope).epsilon(0.15));

    // Heat analogue over the same cutoffs has converged.
    const double h3 = scan1.heat_rows[1].value;
    const double h4 = scan1.heat_rows[2].value;
    CHECK(std::abs(h4 - h3) <= 0.01 * std::abs(h4));
}
