#pragma once

#include <vector>

#include "heatlab/dorronsoro.hpp"
#include "heatlab/fields.hpp"

namespace heatlab::spectral {

using fields::GridField;

struct KReport {
    int n = 0;
    double gamma = 0.0;
    double k_value = 0.0;           // k(n, gamma)
    double quadrature_error = 0.0;  // mesh-doubling estimate
    double bound_rhs = 0.0;         // right side of the k bound
    double ratio = 0.0;             // k_value / bound_rhs
};

// k(n, gamma) = n (|B^{n-1}|/|B^n|)
//   * int_0^inf int_{-1}^1 |e^{isu} - (1+isu) e^{-gamma s^2}|^2 (1-u^2)^{(n-1)/2} du ds/s^3.
// Quadrature: Gauss-Jacobi in u against the (1-u^2)^{(n-1)/2} weight, then
// panel-adaptive integration in s split at s = 1 with a log substitution for
// the tail; the far tail (where the Gaussian factor is negligible) is added
// in closed form.
KReport k_constant(int n, double gamma);

// gamma n + int_0^inf v^2 e^{-v^2} log(2 + (v^2 + gamma n)/(v sqrt(gamma n))) dv.
double k_bound_rhs(int n, double gamma);

// Closed-form integrand in s via Bessel J (the u-integral done analytically);
// used as an independent oracle for k_constant.
double k_constant_bessel_oracle(int n, double gamma);

struct HeatIdentityReport {
    double lhs = 0.0;      // Carleson functional, direct (x, t, z) quadrature
    double rhs = 0.0;      // sqrt(k(n,gamma)/n) * || |xi| fhat ||_2
    double rel_gap = 0.0;  // |lhs - rhs| / rhs
    double k_value = 0.0;
};

// Both sides of the exact heat identity for Euclidean X = Y, q = 2. The left
// side goes through the dorronsoro module's direct path; the right side is
// assembled on the Fourier side.
HeatIdentityReport verify_heat_identity(const GridField& f, double gamma,
                                        const dorro::DorroConfig& cfg);

struct PoissonDivergenceRow {
    double epsilon = 0.0;
    double value = 0.0;  // truncated integral over s in [epsilon, 1]
};

struct PoissonDivergenceReport {
    std::vector<PoissonDivergenceRow> rows;
    double slope = 0.0;            // fitted b in a + b log(1/eps) over the smallest eps
    double predicted_slope = 0.0;  // gamma^2 * int (1-u^2)^{(n-1)/2} du
    double fit_residual = 0.0;     // relative residual of the log fit
    std::vector<PoissonDivergenceRow> heat_rows;  // same cutoffs, heat analogue
};

// Truncated Poisson-side integral per cutoff with the log-divergence fit, and
// the heat analogue over the same cutoffs (which converges).
PoissonDivergenceReport poisson_divergence_scan(int n, double gamma,
                                                const std::vector<double>& cutoffs);

// n |B^{n-1}| / |B^n|, the prefactor relating the double integral to
// k(n, gamma).
double k_prefactor(int n);

}  // namespace heatlab::spectral
