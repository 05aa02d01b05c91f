#pragma once

#include <optional>
#include <string>
#include <vector>

#include "heatlab/rng.hpp"

namespace heatlab::spaces {

using Vec = std::vector<double>;

enum class NormKind { Lp, DiagLp, Polytope };

// A finite-dimensional norm on R^n together with a reference Euclidean
// structure |.|. The Euclidean structure is a SPD matrix E with
// |x|^2 = x^T E x (identity by default); all sphere/ball averages are taken
// with respect to |.|.
class NormedSpace {
  public:
    NormedSpace() = default;  // empty placeholder, dim() == 0

    static NormedSpace lp(int dim, double p);
    static NormedSpace diag_lp(int dim, double p, Vec weights);
    // ||x|| = max_i |<facet_i, x>| for a centrally symmetric polytope ball.
    static NormedSpace polytope(int dim, std::vector<Vec> facets);

    NormedSpace with_euclid_scale(std::vector<Vec> spd) const;

    int dim() const { return dim_; }
    NormKind kind() const { return kind_; }
    double p() const { return p_; }
    const Vec& weights() const { return weights_; }
    const std::vector<Vec>& facets() const { return facets_; }
    bool identity_scale() const { return scale_identity_; }

    // ||x||_X; throws on dimension mismatch.
    double norm(const Vec& x) const;
    // Reference Euclidean norm |x|.
    double euclid_norm(const Vec& x) const;
    // Gauge functional computed by bisection on the membership oracle; used
    // as an independent evaluation path.
    double gauge_norm(const Vec& x) const;

    // Maps a vector from round-Euclidean reference coordinates (|.|_2) to the
    // ambient coordinates, i.e. applies E^{-1/2}; identity when E = I.
    Vec from_reference(const Vec& u) const;

    // Exact closed forms where available (identity Euclidean structure).
    std::optional<double> closed_form_ball_volume() const;   // |B_X|
    std::optional<double> closed_form_b() const;             // sup_{S^{n-1}} ||.||_X
    std::optional<double> closed_form_circumradius() const;  // I_inf = max_{B_X} |.|
    std::optional<double> closed_form_second_moment(int axis) const;  // int_{B_X} x_axis^2 dx

    // Dual norm of a linear functional a (i.e. sup_{||z||_X <= 1} <a, z>)
    // when a closed form exists.
    std::optional<double> closed_form_dual_norm(const Vec& a) const;

    std::string describe() const;

  private:
    int dim_ = 0;
    NormKind kind_ = NormKind::Lp;
    double p_ = 2.0;
    Vec weights_;
    std::vector<Vec> facets_;
    bool scale_identity_ = true;
    std::vector<Vec> scale_;       // E
    std::vector<Vec> scale_inv_sqrt_;
};

struct InvariantEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::string method = "closed-form";  // closed-form | monte-carlo | quadrature
    long long samples = 0;
    std::uint64_t seed = 0;
};

// --- sampling ----------------------------------------------------------

// Uniform sphere draw under the reference Euclidean structure.
Vec sphere_point(const NormedSpace& space, Rng& rng);

// Uniform ball sampler with the rejection radius resolved once at
// construction. l_p balls are sampled exactly (independent generalized-Gamma
// coordinates plus the radial mixing variable); other norms fall back to
// rejection from the circumscribed Euclidean ball. Throws if the acceptance
// rate falls below 1e-6.
class BallSampler {
  public:
    explicit BallSampler(const NormedSpace& space);
    Vec draw(Rng& rng) const;

  private:
    const NormedSpace* space_;
    bool direct_ = true;
    double reject_radius_ = 0.0;
};

// Batch versions; deterministic given the seed. n = 1 spheres yield +-1.
std::vector<Vec> sample_sphere(const NormedSpace& space, long long count, std::uint64_t seed);
std::vector<Vec> sample_ball(const NormedSpace& space, long long count, std::uint64_t seed);

// --- invariants ---------------------------------------------------------

// M_p(X) = (avg_{S^{n-1}} ||sigma||_X^p)^{1/p}; p = inf routes to invariant_b.
InvariantEstimate invariant_M_p(const NormedSpace& space, double p, long long count,
                                std::uint64_t seed, int threads = 1);

// I_q(X) = (avg_{B_X} |x|^q)^{1/q}.
InvariantEstimate invariant_I_q(const NormedSpace& space, double q, long long count,
                                std::uint64_t seed, int threads = 1);

// b(X) = M_inf(X) via closed form when available, else multi-start projected
// ascent with a dense-sampling fallback for n <= 4.
InvariantEstimate invariant_b(const NormedSpace& space, int starts, std::uint64_t seed);

// Circumradius I_inf(X) (same machinery on the reciprocal of the norm).
InvariantEstimate circumradius(const NormedSpace& space, int starts, std::uint64_t seed);

// |B_X| via closed form, else Monte Carlo hit rate from the circumscribed
// Euclidean ball.
InvariantEstimate ball_volume(const NormedSpace& space, long long count, std::uint64_t seed,
                              int threads = 1);

struct GaussianMomentResult {
    InvariantEstimate monte_carlo;  // direct Monte Carlo estimate of E ||G||_X^p
    double closed_form = 0.0;       // 2^{p/2} Gamma((n+p)/2)/Gamma(n/2) * M_p(X)^p
    double closed_form_std_error = 0.0;
};

GaussianMomentResult gaussian_norm_moment(const NormedSpace& space, double p, long long count,
                                          std::uint64_t seed, int threads = 1);

struct LmsRatioReport {
    std::vector<double> p_values;
    std::vector<double> ratios;  // M_p / (M + sqrt(p/(n+p)) b)
    double band_constant = 5.0;
    bool all_in_band = true;
};

LmsRatioReport check_lms_ratio(const NormedSpace& space, const std::vector<double>& p_list,
                               long long count, std::uint64_t seed, int threads = 1);

struct UvMomentResult {
    InvariantEstimate moment;  // (avg_{B_U} ||u||_V^q)^{1/q}
    double lower_bound = 0.0;  // (n/(n+q))^{1/q} (|B_U|/|B_V|)^{1/n}
    bool holds_within_3sigma = true;
};

UvMomentResult uv_moment(const NormedSpace& U, const NormedSpace& V, double q, long long count,
                         std::uint64_t seed, int threads = 1);

struct ProductLowerBoundResult {
    InvariantEstimate I_q;
    InvariantEstimate M_p;
    double product = 0.0;
    double bound = 0.0;  // (n/(n+q))^{1/q}
    bool holds_within_3sigma = true;
};

ProductLowerBoundResult product_lower_bound(const NormedSpace& space, double p, double q,
                                            long long count, std::uint64_t seed, int threads = 1);

struct IsotropicResult {
    NormedSpace body;               // rescaled body with |B| = 1
    double L_X = 0.0;               // isotropic constant
    double direction_spread = 0.0;  // relative spread of (int (x.y)^2)^{1/2}/|y| over sampled y
    bool covariance_diagonalized = false;
    std::string method;
};

// Rescales the body to unit volume and an equalized second-moment matrix.
// Coordinate-symmetric bodies only need per-axis scaling; non-unconditional
// polytopes get a covariance-diagonalization preprocessing step, noted in the
// report.
IsotropicResult isotropic_normalize(const NormedSpace& space, long long count, std::uint64_t seed,
                                    int threads = 1);

// Surface area of S^{n-1} and volume of B^n.
double euclidean_ball_volume(int n);
double euclidean_sphere_area(int n);

// log n with the convention log 1 := 1.
double log_dim(int n);

}  // namespace heatlab::spaces
