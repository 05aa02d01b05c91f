#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "heatlab/fields.hpp"
#include "heatlab/heat.hpp"
#include "heatlab/lps.hpp"
#include "heatlab/spaces.hpp"

namespace heatlab::dorro {

using fields::GridField;
using heat::AffineMap;
using lps::FunctionalReport;
using lps::ScaleGrid;
using spaces::NormedSpace;
using spaces::Vec;

struct DorroConfig {
    NormedSpace X;                 // domain geometry (defaults to l2 of the field dim)
    double pout = 2.0;             // l_p norm on the target components
    double q = 2.0;                // q >= 2
    std::optional<double> gamma;   // nullopt = choose via optimal_gamma
    int x_stride = 2;              // stride over the field grid for the x-integral
    ScaleGrid scale_grid;          // t-grid (log-uniform)
    int ball_samples = 256;        // inner-average point count per (x, t)
    std::uint64_t seed = 11;
    int threads = 1;
    bool least_squares_candidate = false;  // optional tighter candidate (flagged in reports)
    // Optional x-integration window (per-axis [lo, hi]); empty = the support
    // box dilated by the top scale.
    std::vector<std::pair<double, double>> x_window;
};

// Fixed quasi-random point set in B_X, reused across every (x, t) cell so the
// cell dependence is smooth. Low-discrepancy constructions for the l2 balls
// in n <= 3 and the cube; Monte Carlo with a frozen seed otherwise.
std::vector<Vec> ball_point_set(const NormedSpace& X, int count, std::uint64_t seed);

struct CarlesonReport : FunctionalReport {
    double gamma = 0.0;
    std::vector<std::pair<double, double>> per_scale;  // (t, contribution to value^q)
};

// Multiscale Carleson functional
//   ( int int avg_{x+tB_X} ||f(y) - Taylor_x(H_{gamma t^2} f)(y)||^q / t^{q+1} dy dt dx )^{1/q},
// reported against K |supp f|^{1/q} Lip(f) with kappa = m_q = 1.
CarlesonReport carleson_functional(const GridField& f, const DorroConfig& cfg);

struct JSplit {
    double total = 0.0;  // the Carleson functional on the same quadrature
    double J1 = 0.0;     // evolute-to-Taylor part
    double J2 = 0.0;     // f-to-evolute part
    double gamma = 0.0;
};

JSplit j_split(const GridField& f, const DorroConfig& cfg);

// gamma(f) = (1/sqrt(n)) (avg_{B_X} |x|^q ||x.grad f||_q^q)^{1/q}
//                      / avg_{S^{n-1}} ||sigma.grad f||_q.
// Throws if the gradient vanishes.
double optimal_gamma(const GridField& f, const DorroConfig& cfg);

// Low-level form taking the directional L_q-norm maps directly (the ball
// moment uses dirnorm_ball, the sphere mean uses dirnorm_sphere).
double optimal_gamma_from_moments(const NormedSpace& X, double q,
                                  const std::function<double(const Vec&)>& dirnorm_ball,
                                  const std::function<double(const Vec&)>& dirnorm_sphere,
                                  long long ball_count, long long sphere_count,
                                  std::uint64_t seed);

// K = kappa n^{1/4} m_q sqrt(I_q(X) M(X)).
double K_constant(double q, int n, const NormedSpace& X, double m_q, double kappa,
                  long long count = 200000, std::uint64_t seed = 23);

// T = c / (n^{5/4} sqrt(I_q(X) M(X) log n)) with the suite constant c = 1/4;
// verified to satisfy T <= 1/(2n).
double local_scale_T(double q, int n, const NormedSpace& X, long long count = 200000,
                     std::uint64_t seed = 23);

struct LocalReport {
    double value = 0.0;       // the averaged local quantity (q-th power scale)
    double bound = 0.0;       // (9 K n)^q / |log r|
    double ratio = 0.0;
    double gamma = 0.0;
    double T = 0.0;
    long long candidates = 0;
    long long lip_violations = 0;  // candidates with scale below threshold but lip > 2
    bool used_least_squares = false;
};

LocalReport local_functional(const GridField& f_on_ball, const DorroConfig& cfg, double r,
                             double T);

// F = f - f(0) on B_X, extended by max{0, n+1-n||x||_X} f(x/||x||_X) outside;
// support sits in (1+1/n) B_X and Lip(F) <= n+2.
GridField extend_to_global(const GridField& f_on_ball, const NormedSpace& X, int out_res);

struct ApproximationResult {
    Vec x;
    double rho = 0.0;
    AffineMap map;
    double lq_error = 0.0;    // normalized by rho
    double linf_error = 0.0;  // normalized by rho
    double lip_of_map = 0.0;
    bool hit = false;             // linf_error <= eps with lip <= 2
    bool unresolved_scale = false;  // search hit the rho >= 4h floor
    double upgrade_constant = 0.0;  // max over cells of linf / lq^{q/(n+q)}
};

// Scans (x, rho) from the largest scale downward; the candidate at each cell
// is the heat-Taylor map of the global extension. Returns the first hit with
// linf_error <= eps and a 2-Lipschitz candidate, else the best cell found.
ApproximationResult affine_search(const GridField& f_on_ball, double eps, double q,
                                  const DorroConfig& cfg);

}  // namespace heatlab::dorro
