#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "heatlab/fields.hpp"
#include "heatlab/heat.hpp"

namespace heatlab::lps {

using fields::GridField;
using heat::Spectral;
using spaces::Vec;

// Logarithmic grid discretizing the measure dt/t, with trapezoid weights in
// log t.
struct ScaleGrid {
    double t_min = 1e-4;
    double t_max = 1.0;
    int points = 64;

    ScaleGrid() = default;
    ScaleGrid(double tmin, double tmax, int npoints);

    // Log-uniform grid at a fixed node density (points per decade of t).
    static ScaleGrid per_decade(double tmin, double tmax, int density = 48);

    std::vector<double> nodes() const;
    std::vector<double> weights() const;  // integrates f(t) dt/t as sum w_k f(t_k)

    // Same spacing extended one octave outward on both ends, capped at
    // t_limit; used for the Richardson-style truncation estimate.
    ScaleGrid extended(double t_limit) const;
};

struct FunctionalReport {
    double value = 0.0;
    double discretization_error_estimate = 0.0;
    ScaleGrid scale_grid;
    std::optional<double> bound_value;
    std::optional<double> ratio;
};

// (int ||t d/dt H_t f||_q^q dt/t)^{1/q}, with the time derivative realized as
// the Laplacian multiplier. q >= 2 required; pout selects the l_p norm on the
// m output components.
FunctionalReport temporal_g(const GridField& f, double q, const ScaleGrid& grid,
                            double pout = 2.0, int threads = 1);

// (int ||sqrt(t) div H_t fvec||_q^q dt/t)^{1/q} for a field with m = n
// components. The report carries the right side sqrt(n) * avg_sigma
// ||sigma . fvec||_q (martingale-cotype constant treated as 1) and the ratio.
FunctionalReport spatial_div_g(const GridField& vec_f, double q, const ScaleGrid& grid,
                               int sphere_dirs = 64, std::uint64_t seed = 17, int threads = 1);

struct DirectionalReport {
    FunctionalReport functional;   // (int ||sqrt(t) (z.grad) H_t f||_q^q dt/t)^{1/q}
    double single_t_sup = 0.0;     // sup over the grid of ||sqrt(t) (z.grad) H_t f||_q
    double single_t_bound = 0.0;   // |z| / sqrt(pi) * ||f||_q
};

DirectionalReport directional_g(const GridField& f, const Vec& z, double q, const ScaleGrid& grid,
                                double pout = 2.0, int threads = 1);

// (int ||(H_t - H_{alpha t}) f||_q^q dt/t)^{1/q}; for q = 2 scalar fields the
// report carries the exact value sqrt(log((1+alpha)^2/(4 alpha))) ||f||_2.
FunctionalReport difference_g(const GridField& f, double alpha, double q, const ScaleGrid& grid,
                              double pout = 2.0, int threads = 1);

struct SingleTimeDivReport {
    double value = 0.0;  // ||sqrt(t) div H_t fvec||_q
    double bound = 0.0;  // Gamma((n+1)/2)/Gamma(n/2) * avg_sigma ||sigma . fvec||_q
    double ratio = 0.0;
};

SingleTimeDivReport spatial_div_single_t(const GridField& vec_f, double t, double q,
                                         int sphere_dirs = 64, std::uint64_t seed = 17);

struct PisierReport {
    double max_ratio = 0.0;
    double mean_ratio = 0.0;
    std::vector<long long> histogram;  // 40 bins over [0, 2]
    double bin_width = 0.05;
    long long trials = 0;
};

// Random dyadic martingales in l_q^m: binary filtration, predictable
// increments uniform in [-1,1]^m, each path rescaled to sup ||M_k|| <= 1.
// Returns the distribution of (sum_k ||M_{k+1}-M_k||_{L_q}^q)^{1/q} /
// sup_k ||M_k||_{L_q}, an empirical lower bound for the martingale cotype
// constant.
PisierReport pisier_martingale_test(double q, int m, int depth, long long trials,
                                    std::uint64_t seed, int threads = 1);

// avg over sphere directions of ||sigma . fvec||_{L_q} for a field with
// m = n components (Monte Carlo over `dirs` directions).
double sphere_avg_directional_norm(const GridField& vec_f, double q, int dirs,
                                   std::uint64_t seed);

}  // namespace heatlab::lps
