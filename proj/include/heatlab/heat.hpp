#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "heatlab/fields.hpp"
#include "heatlab/spaces.hpp"

namespace heatlab::heat {

using fields::GridField;
using spaces::NormedSpace;
using spaces::Vec;

// Thrown when a requested time exceeds the admissible range for the field's
// box; the CLI maps this to exit code 2.
struct AdmissibilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SemigroupKind { Heat, Poisson };

// y -> value + linear (y - base_point).
struct AffineMap {
    Vec base_point;                // x0
    Vec value;                     // c in R^m
    std::vector<Vec> linear;       // m rows of length n
    double interp_bias = 0.0;      // O(h^2) multilinear-interpolation bias estimate

    int dim_in() const { return base_point.empty() ? 0 : static_cast<int>(base_point.size()); }
    int dim_out() const { return static_cast<int>(value.size()); }
    void eval(const Vec& y, double* out) const;
};

// Zero-padded (2x per axis) Fourier transform of a GridField with the paper's
// symmetric normalization; multipliers are applied mode-by-mode and results
// restricted back to the original grid.
class Spectral {
  public:
    explicit Spectral(const GridField& f);
    ~Spectral();
    Spectral(const Spectral&) = delete;
    Spectral& operator=(const Spectral&) = delete;

    int dim_in() const { return n_; }
    int dim_out() const { return m_; }
    int padded_res() const { return pres_; }

    // Frequency of padded-grid mode index k along one axis.
    double freq(int k) const;

    // Applies a real multiplier g(|xi|^2) to every mode. Thread-safe.
    GridField apply_radial(const std::function<double(double)>& g) const;

    // Applies i <z, xi> g(|xi|^2). Thread-safe.
    GridField apply_directional(const Vec& z, const std::function<double(double)>& g) const;

    // Gradient field with components j*m + c = d_j (g * f_c). g = 1 gives the
    // spectral gradient of f itself.
    GridField apply_gradient(const std::function<double(double)>& g) const;

    // sum_j d_j (g * f_j) for a vector field with m = n. Thread-safe.
    GridField apply_divergence(const std::function<double(double)>& g) const;

    // Discrete L2 norm of |xi| fhat (equals ||grad f||_2 by Plancherel).
    double gradient_l2() const;

    // Discrete L2 norm of f from the spectral side.
    double field_l2() const;

    struct Impl;

  private:
    std::unique_ptr<Impl> impl_;
    int n_ = 0, m_ = 0, pres_ = 0;
};

struct Evolute {
    GridField values;    // H_t f (or P_t f) on the original grid
    GridField gradient;  // n*m components, j*m + c = d_j (H_t f_c)
    double t = 0.0;
    SemigroupKind kind = SemigroupKind::Heat;
};

// Largest admissible heat time for a box (sqrt(t) <= (b-a)/8).
double heat_time_limit(const GridField& f);
// Largest admissible Poisson time (t <= (b-a)/8).
double poisson_time_limit(const GridField& f);

// Heat evolute via the multiplier e^{-t |xi|^2} on the padded grid.
// with_gradient controls whether the spatial gradient is also produced.
Evolute heat_convolve(const GridField& f, double t, bool with_gradient = true);
Evolute heat_convolve(const Spectral& spec, const GridField& f, double t,
                      bool with_gradient = true);

// Poisson evolute via the multiplier e^{-t |xi|}.
Evolute poisson_convolve(const GridField& f, double t, bool with_gradient = true);

// Spectral gradient of a field (n*m components).
GridField gradient(const GridField& f);
// Central finite differences, as a validation path.
GridField fd_gradient(const GridField& f);

// Direct real-space kernel quadrature of (h_t * f)(x) over the grid,
// retained as a cross-check for the spectral path.
void direct_heat_quadrature(const GridField& f, double t, const Vec& x, double* out);

// First-order Taylor approximant of H_{gamma t^2} f at x (multilinear
// interpolation of the evolute and its gradient).
AffineMap taylor_evolute(const GridField& f, const Vec& x, double t, double gamma);
AffineMap taylor_from_evolute(const Evolute& e, const Vec& x);

// sup_{z in boundary of B_X} ||A z||_{l_pout}, exact for m = 1 (dual norm)
// and for X = l_2, pout = 2 (spectral norm); otherwise sphere sampling with
// local ascent refinement.
double affine_lip(const AffineMap& map, const NormedSpace& X, double pout, int samples,
                  std::uint64_t seed);

struct LipThresholdConstants {
    double M1 = 1.0;  // M_1(X)
    double b = 1.0;   // b(X) = M_inf(X)
};

LipThresholdConstants lip_threshold_constants(const NormedSpace& X, long long count,
                                              std::uint64_t seed);

// Admissible heat-time bound (1-||x||_X)^2 / (C (M_1 sqrt(n) + b sqrt(log L))^2)
// below which the Taylor approximant of H_t f is 2-Lipschitz for every f that
// is 1-Lipschitz on B_X and L-Lipschitz globally.
double evolute_lip_threshold(const NormedSpace& X, const Vec& x, double L, double C,
                             const LipThresholdConstants& consts);
// Convenience overload that resolves M_1(X) and b(X) internally.
double evolute_lip_threshold(const NormedSpace& X, const Vec& x, double L, double C = 64.0);

struct KernelDerivativeL1 {
    double closed_form = 0.0;  // 2/Gamma(n/2) (n/2e)^{n/2}
    double quadrature = 0.0;   // radial quadrature of int |t d/dt h_t|
};

KernelDerivativeL1 heat_time_derivative_l1(int n, double t);

}  // namespace heatlab::heat
