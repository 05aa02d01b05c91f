#pragma once

#include <cstdint>
#include <vector>

#include "heatlab/fields.hpp"
#include "heatlab/heat.hpp"
#include "heatlab/network_simplex.hpp"
#include "heatlab/spaces.hpp"

namespace heatlab::transport {

using fields::GridField;
using heat::AffineMap;
using spaces::NormedSpace;
using spaces::Vec;

struct DiscreteMeasure {
    std::vector<Vec> points;
    std::vector<double> weights;

    double total() const;
    void validate() const;  // nonnegative weights
};

struct TransportPlan {
    struct Flow {
        int i = 0;
        int j = 0;
        double mass = 0.0;
    };
    std::vector<Flow> flows;
    double cost = 0.0;
};

struct W1Result {
    double value = 0.0;
    TransportPlan plan;
};

// Wasserstein-1 distance under the ground metric ||.||_X: exact min-cost flow
// over the atoms. In one dimension the quantile closed form is the primary
// value and the flow solve serves as a cross-check (the returned plan).
W1Result w1_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const NormedSpace& X);

// Quantile-function closed form, n = 1 only.
double w1_quantile_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const NormedSpace& X);

// Flow-only path (any dimension).
W1Result w1_flow(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const NormedSpace& X);

// Quadrature atoms covering B_X within the field's grid: node-cell
// intersections with partial-volume weights (exact in 1-d, subsampled in
// higher dimension).
struct BallQuadrature {
    std::vector<Vec> points;     // centroids
    std::vector<double> weights;  // |cell intersect B_X|
    double volume = 0.0;         // sum of weights
    std::vector<double> second_moment;  // per-axis int x_j^2 over the atoms
};

BallQuadrature ball_quadrature(const GridField& f, const NormedSpace& X);

// Orthogonal projection of L_2(B_X) onto affine maps, computed against the
// discrete ball quadrature (hence exactly idempotent on affine inputs).
// Expects an isotropic-normalized space (|B_X| = 1 within tolerance).
AffineMap proj_operator(const GridField& f, const NormedSpace& X_iso, double L_X);

struct HalfBallMeasures {
    DiscreteMeasure mu_plus, mu_minus;  // probability-normalized
    DiscreteMeasure nu_plus, nu_minus;  // raw densities (x.y)^{+-}
};

// Cell-centered discretization of the half-ball measures with densities
// (x.y)^{+-} on B_X; atoms_per_measure controls the resolution.
HalfBallMeasures half_ball_measures(const NormedSpace& X, const Vec& x, int atoms_per_measure);

struct ProjNormRow {
    Vec x;                  // direction on the X-unit sphere
    double w1_nu = 0.0;     // W1(nu_x^+, nu_x^-)
    double duality = 0.0;   // w1_nu / L_X^2
    double w1_mu = 0.0;     // W1(mu_x^+, mu_x^-)
    double symmetry_ratio = 0.0;  // |x| / (L_X ||x||_X) * w1_mu
};

struct ProjNormReport {
    double proj_norm = 0.0;  // sup of duality over sampled directions
    std::vector<ProjNormRow> rows;
    int atoms_used = 0;
};

// sup over sampled x in the X-unit sphere of W1(nu_x^+, nu_x^-) / L_X^2,
// with refinement doubling until the W1 values move by <= 2%.
ProjNormReport proj_norm_estimate(const NormedSpace& X_iso, double L_X, int sphere_samples,
                                  int atoms, std::uint64_t seed, int threads = 1);

}  // namespace heatlab::transport
