#include "heatlab/spaces.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "heatlab/numeric.hpp"

namespace heatlab::spaces {

namespace {

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Vec mat_apply(const std::vector<Vec>& m, const Vec& x) {
    Vec y(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) y[i] += m[i][j] * x[j];
    return y;
}

Vec round_sphere_point(int n, Rng& rng) {
    Vec g(static_cast<std::size_t>(n));
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (auto& v : g) {
            v = rng.normal();
            norm2 += v * v;
        }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : g) v *= inv;
    return g;
}

}  // namespace

double euclidean_ball_volume(int n) {
    return std::exp(0.5 * n * std::log(M_PI) - std::lgamma(1.0 + 0.5 * n));
}

double euclidean_sphere_area(int n) { return n * euclidean_ball_volume(n); }

double log_dim(int n) { return n <= 1 ? 1.0 : std::log(static_cast<double>(n)); }

// --- NormedSpace ---------------------------------------------------------

NormedSpace NormedSpace::lp(int dim, double p) {
    if (dim < 1) throw std::invalid_argument("lp: dim must be positive");
    if (!(p >= 1.0)) throw std::invalid_argument("lp: p must be >= 1");
    NormedSpace s;
    s.dim_ = dim;
    s.kind_ = NormKind::Lp;
    s.p_ = p;
    return s;
}

NormedSpace NormedSpace::diag_lp(int dim, double p, Vec weights) {
    if (static_cast<int>(weights.size()) != dim)
        throw std::invalid_argument("diag_lp: weight count must equal dim");
    for (double w : weights)
        if (!(w > 0.0)) throw std::invalid_argument("diag_lp: weights must be positive");
    NormedSpace s = lp(dim, p);
    s.kind_ = NormKind::DiagLp;
    s.weights_ = std::move(weights);
    return s;
}

NormedSpace NormedSpace::polytope(int dim, std::vector<Vec> facets) {
    if (dim < 1) throw std::invalid_argument("polytope: dim must be positive");
    if (facets.empty()) throw std::invalid_argument("polytope: need at least one functional");
    for (const auto& f : facets)
        if (static_cast<int>(f.size()) != dim)
            throw std::invalid_argument("polytope: functional dimension mismatch");
    NormedSpace s;
    s.dim_ = dim;
    s.kind_ = NormKind::Polytope;
    s.facets_ = std::move(facets);
    return s;
}

NormedSpace NormedSpace::with_euclid_scale(std::vector<Vec> spd) const {
    if (static_cast<int>(spd.size()) != dim_)
        throw std::invalid_argument("with_euclid_scale: matrix dimension mismatch");
    NormedSpace s = *this;
    Eigen::MatrixXd E(dim_, dim_);
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j)
            E(i, j) = spd[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(E);
    if (solver.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument("with_euclid_scale: matrix must be positive definite");
    const Eigen::MatrixXd inv_half = solver.operatorInverseSqrt();
    s.scale_ = std::move(spd);
    s.scale_inv_sqrt_.assign(static_cast<std::size_t>(dim_), Vec(static_cast<std::size_t>(dim_)));
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j)
            s.scale_inv_sqrt_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = inv_half(i, j);
    s.scale_identity_ = E.isIdentity(1e-15);
    return s;
}

double NormedSpace::norm(const Vec& x) const {
    if (static_cast<int>(x.size()) != dim_)
        throw std::invalid_argument("norm: vector dimension mismatch");
    switch (kind_) {
        case NormKind::Lp: {
            if (std::isinf(p_)) {
                double m = 0.0;
                for (double v : x) m = std::max(m, std::abs(v));
                return m;
            }
            if (p_ == 1.0) {
                double s = 0.0;
                for (double v : x) s += std::abs(v);
                return s;
            }
            if (p_ == 2.0) return std::sqrt(dot(x, x));
            double m = 0.0;
            for (double v : x) m = std::max(m, std::abs(v));
            if (m == 0.0) return 0.0;
            double s = 0.0;
            for (double v : x) s += std::pow(std::abs(v) / m, p_);
            return m * std::pow(s, 1.0 / p_);
        }
        case NormKind::DiagLp: {
            Vec y(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) y[i] = weights_[i] * x[i];
            return NormedSpace::lp(dim_, p_).norm(y);
        }
        case NormKind::Polytope: {
            double m = 0.0;
            for (const auto& f : facets_) m = std::max(m, std::abs(dot(f, x)));
            return m;
        }
    }
    return 0.0;
}

double NormedSpace::euclid_norm(const Vec& x) const {
    if (static_cast<int>(x.size()) != dim_)
        throw std::invalid_argument("euclid_norm: vector dimension mismatch");
    if (scale_identity_) return std::sqrt(dot(x, x));
    const Vec ex = mat_apply(scale_, x);
    return std::sqrt(std::max(0.0, dot(x, ex)));
}

Vec NormedSpace::from_reference(const Vec& u) const {
    if (scale_identity_) return u;
    return mat_apply(scale_inv_sqrt_, u);
}

double NormedSpace::gauge_norm(const Vec& x) const {
    const double direct = norm(x);
    if (direct == 0.0) return 0.0;
    auto inside = [&](double lambda) {
        Vec y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / lambda;
        switch (kind_) {
            case NormKind::Lp:
            case NormKind::DiagLp: {
                const bool diag = kind_ == NormKind::DiagLp;
                if (std::isinf(p_)) {
                    for (std::size_t i = 0; i < y.size(); ++i) {
                        const double v = diag ? weights_[i] * std::abs(y[i]) : std::abs(y[i]);
                        if (v > 1.0) return false;
                    }
                    return true;
                }
                double s = 0.0;
                for (std::size_t i = 0; i < y.size(); ++i) {
                    const double v = diag ? weights_[i] * std::abs(y[i]) : std::abs(y[i]);
                    s += std::pow(v, p_);
                }
                return s <= 1.0;
            }
            case NormKind::Polytope: {
                for (const auto& f : facets_)
                    if (std::abs(dot(f, y)) > 1.0) return false;
                return true;
            }
        }
        return true;
    };
    double hi = direct * 2.0 + 1e-300;
    double lo = 0.0;
    while (!inside(hi)) hi *= 2.0;
    for (int it = 0; it < 200 && (hi - lo) > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (inside(mid))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

std::optional<double> NormedSpace::closed_form_ball_volume() const {
    if (!scale_identity_) return std::nullopt;
    switch (kind_) {
        case NormKind::Lp: {
            if (std::isinf(p_)) return std::exp(dim_ * std::log(2.0));
            // |B_p^n| = 2^n Gamma(1+1/p)^n / Gamma(1+n/p)
            return std::exp(dim_ * std::log(2.0) + dim_ * std::lgamma(1.0 + 1.0 / p_) -
                            std::lgamma(1.0 + dim_ / p_));
        }
        case NormKind::DiagLp: {
            const auto base = NormedSpace::lp(dim_, p_).closed_form_ball_volume();
            double logw = 0.0;
            for (double w : weights_) logw += std::log(w);
            return *base * std::exp(-logw);
        }
        case NormKind::Polytope:
            return std::nullopt;
    }
    return std::nullopt;
}

std::optional<double> NormedSpace::closed_form_b() const {
    if (!scale_identity_) return std::nullopt;
    switch (kind_) {
        case NormKind::Lp:
            if (std::isinf(p_) || p_ >= 2.0) return 1.0;
            return std::pow(static_cast<double>(dim_), 1.0 / p_ - 0.5);
        case NormKind::DiagLp: {
            if (std::isinf(p_) || p_ >= 2.0)
                return *std::max_element(weights_.begin(), weights_.end());
            // ||diag(d)||_{2->p} = ||d||_r with 1/r = 1/p - 1/2.
            const double r = 2.0 * p_ / (2.0 - p_);
            double s = 0.0;
            for (double w : weights_) s += std::pow(w, r);
            return std::pow(s, 1.0 / r);
        }
        case NormKind::Polytope: {
            double m = 0.0;
            for (const auto& f : facets_) m = std::max(m, std::sqrt(dot(f, f)));
            return m;
        }
    }
    return std::nullopt;
}

std::optional<double> NormedSpace::closed_form_circumradius() const {
    if (!scale_identity_) return std::nullopt;
    switch (kind_) {
        case NormKind::Lp:
            if (p_ <= 2.0) return 1.0;
            if (std::isinf(p_)) return std::sqrt(static_cast<double>(dim_));
            return std::pow(static_cast<double>(dim_), 0.5 - 1.0 / p_);
        case NormKind::DiagLp: {
            if (p_ <= 2.0) {
                double m = 0.0;
                for (double w : weights_) m = std::max(m, 1.0 / w);
                return m;
            }
            // ||diag(1/d)||_{p->2} = ||1/d||_s with 1/s = 1/2 - 1/p.
            double s = 0.0;
            if (std::isinf(p_)) {
                for (double w : weights_) s += 1.0 / (w * w);
                return std::sqrt(s);
            }
            const double r = 2.0 * p_ / (p_ - 2.0);
            for (double w : weights_) s += std::pow(1.0 / w, r);
            return std::pow(s, 1.0 / r);
        }
        case NormKind::Polytope:
            return std::nullopt;
    }
    return std::nullopt;
}

std::optional<double> NormedSpace::closed_form_second_moment(int axis) const {
    if (!scale_identity_) return std::nullopt;
    switch (kind_) {
        case NormKind::Lp: {
            if (std::isinf(p_)) return std::exp(dim_ * std::log(2.0)) / 3.0;
            // Dirichlet integral: int_{B_p^n} x_i^2 dx
            //   = (2/p)^n Gamma(3/p) Gamma(1/p)^{n-1} / Gamma(1+(n+2)/p).
            return std::exp(dim_ * std::log(2.0 / p_) + std::lgamma(3.0 / p_) +
                            (dim_ - 1) * std::lgamma(1.0 / p_) -
                            std::lgamma(1.0 + (dim_ + 2.0) / p_));
        }
        case NormKind::DiagLp: {
            const auto base = NormedSpace::lp(dim_, p_).closed_form_second_moment(axis);
            double logw = 0.0;
            for (double w : weights_) logw += std::log(w);
            const double d = weights_[static_cast<std::size_t>(axis)];
            return *base * std::exp(-logw) / (d * d);
        }
        case NormKind::Polytope:
            return std::nullopt;
    }
    return std::nullopt;
}

std::optional<double> NormedSpace::closed_form_dual_norm(const Vec& a) const {
    switch (kind_) {
        case NormKind::Lp: {
            if (p_ == 1.0) {
                double m = 0.0;
                for (double v : a) m = std::max(m, std::abs(v));
                return m;
            }
            if (std::isinf(p_)) {
                double s = 0.0;
                for (double v : a) s += std::abs(v);
                return s;
            }
            const double q = p_ / (p_ - 1.0);
            double s = 0.0;
            for (double v : a) s += std::pow(std::abs(v), q);
            return std::pow(s, 1.0 / q);
        }
        case NormKind::DiagLp: {
            Vec scaled(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) scaled[i] = a[i] / weights_[i];
            return NormedSpace::lp(dim_, p_).closed_form_dual_norm(scaled);
        }
        case NormKind::Polytope:
            return std::nullopt;
    }
    return std::nullopt;
}

std::string NormedSpace::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case NormKind::Lp:
            os << "l" << p_ << "^" << dim_;
            break;
        case NormKind::DiagLp:
            os << "diag-l" << p_ << "^" << dim_;
            break;
        case NormKind::Polytope:
            os << "polytope^" << dim_ << "(" << facets_.size() << " facets)";
            break;
    }
    if (!scale_identity_) os << " [scaled euclid]";
    return os.str();
}

// --- sampling ------------------------------------------------------------

Vec sphere_point(const NormedSpace& space, Rng& rng) {
    return space.from_reference(round_sphere_point(space.dim(), rng));
}

std::vector<Vec> sample_sphere(const NormedSpace& space, long long count, std::uint64_t seed) {
    if (count <= 0) throw std::invalid_argument("sample_sphere: count must be positive");
    Rng rng = Rng(seed).split(0x5f3759df);
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) out.push_back(sphere_point(space, rng));
    return out;
}

BallSampler::BallSampler(const NormedSpace& space) : space_(&space) {
    direct_ = space.kind() == NormKind::Lp || space.kind() == NormKind::DiagLp;
    if (!direct_) {
        if (!space.identity_scale())
            throw std::invalid_argument(
                "BallSampler: rejection sampling requires the identity Euclidean structure");
        reject_radius_ = circumradius(space, 64, 0xc1c7).value * (1.0 + 1e-9);
    }
}

Vec BallSampler::draw(Rng& rng) const {
    const NormedSpace& space = *space_;
    const int n = space.dim();
    if (direct_) {
        const double p = space.p();
        Vec x(static_cast<std::size_t>(n));
        if (std::isinf(p)) {
            for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        } else {
            // Exact direct method: coordinates |g_i| = G_i^{1/p} with
            // G_i ~ Gamma(1/p) and random signs, radially mixed by an
            // independent Exp(1) variate.
            double s = 0.0;
            for (auto& v : x) {
                const double g = rng.gamma(1.0 / p);
                const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                v = sign * std::pow(g, 1.0 / p);
                s += g;
            }
            const double w = rng.gamma(1.0);
            const double denom = std::pow(s + w, 1.0 / p);
            for (auto& v : x) v /= denom;
        }
        if (space.kind() == NormKind::DiagLp)
            for (std::size_t i = 0; i < x.size(); ++i) x[i] /= space.weights()[i];
        return x;
    }
    long long proposals = 0;
    for (;;) {
        Vec g(static_cast<std::size_t>(n));
        double norm2 = 0.0;
        for (auto& v : g) {
            v = rng.normal();
            norm2 += v * v;
        }
        const double r = reject_radius_ * std::pow(rng.uniform(), 1.0 / n);
        const double scalefac = norm2 > 0 ? r / std::sqrt(norm2) : 0.0;
        for (auto& v : g) v *= scalefac;
        ++proposals;
        if (space.norm(g) <= 1.0) return g;
        if (proposals > 2000000)
            throw std::runtime_error("BallSampler: rejection acceptance rate below 1e-6 for " +
                                     space.describe());
    }
}

std::vector<Vec> sample_ball(const NormedSpace& space, long long count, std::uint64_t seed) {
    if (count <= 0) throw std::invalid_argument("sample_ball: count must be positive");
    BallSampler sampler(space);
    Rng rng = Rng(seed).split(0xba11);
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) out.push_back(sampler.draw(rng));
    return out;
}

// --- extremization on the sphere ------------------------------------------

namespace {

// Multi-start projected ascent of sigma -> sign * ||sigma||_X on S^{n-1},
// with a dense-sample warm start for n <= 4. Returns the extremal norm value.
double extremize_on_sphere(const NormedSpace& space, int starts, std::uint64_t seed, double sign) {
    const int n = space.dim();
    Rng rng = Rng(seed).split(0xe57);
    auto objective = [&](const Vec& u) { return sign * space.norm(space.from_reference(u)); };

    double best = -1e300;
    auto consider = [&](const Vec& u) { best = std::max(best, objective(u)); };

    Vec best_start;
    if (n <= 4) {
        const long long dense = 1000000;
        Rng drng = rng.split(1);
        double best_dense = -1e300;
        for (long long i = 0; i < dense; ++i) {
            Vec u = round_sphere_point(n, drng);
            const double v = objective(u);
            if (v > best_dense) {
                best_dense = v;
                best_start = u;
            }
        }
        best = std::max(best, best_dense);
    }

    for (int s0 = 0; s0 <= starts; ++s0) {
        Rng srng = rng.split(100 + static_cast<std::uint64_t>(s0));
        Vec u = (s0 == 0 && !best_start.empty()) ? best_start : round_sphere_point(n, srng);
        double step = 0.25;
        double fu = objective(u);
        for (int iter = 0; iter < 400; ++iter) {
            Vec grad(static_cast<std::size_t>(n), 0.0);
            const double eps = 1e-7;
            for (int j = 0; j < n; ++j) {
                Vec up = u, dn = u;
                up[static_cast<std::size_t>(j)] += eps;
                dn[static_cast<std::size_t>(j)] -= eps;
                double nu = 0.0, nd = 0.0;
                for (double v : up) nu += v * v;
                for (double v : dn) nd += v * v;
                for (auto& v : up) v /= std::sqrt(nu);
                for (auto& v : dn) v /= std::sqrt(nd);
                grad[static_cast<std::size_t>(j)] = (objective(up) - objective(dn)) / (2.0 * eps);
            }
            const double gdotu = dot(grad, u);
            double gnorm2 = 0.0;
            for (int j = 0; j < n; ++j) {
                grad[static_cast<std::size_t>(j)] -= gdotu * u[static_cast<std::size_t>(j)];
                gnorm2 += grad[static_cast<std::size_t>(j)] * grad[static_cast<std::size_t>(j)];
            }
            if (std::sqrt(gnorm2) <= 1e-10) break;
            bool improved = false;
            while (step > 1e-14) {
                Vec trial = u;
                for (int j = 0; j < n; ++j)
                    trial[static_cast<std::size_t>(j)] += step * grad[static_cast<std::size_t>(j)];
                double tn = 0.0;
                for (double v : trial) tn += v * v;
                for (auto& v : trial) v /= std::sqrt(tn);
                const double ft = objective(trial);
                if (ft > fu) {
                    u = trial;
                    fu = ft;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!improved) break;
        }
        consider(u);
    }
    return sign * best;
}

}  // namespace

InvariantEstimate invariant_b(const NormedSpace& space, int starts, std::uint64_t seed) {
    InvariantEstimate e;
    e.seed = seed;
    if (auto cf = space.closed_form_b()) {
        e.value = *cf;
        e.method = "closed-form";
        return e;
    }
    e.value = extremize_on_sphere(space, std::max(starts, 64), seed, +1.0);
    e.method = "monte-carlo";
    e.samples = std::max(starts, 64);
    return e;
}

InvariantEstimate circumradius(const NormedSpace& space, int starts, std::uint64_t seed) {
    InvariantEstimate e;
    e.seed = seed;
    if (auto cf = space.closed_form_circumradius()) {
        e.value = *cf;
        e.method = "closed-form";
        return e;
    }
    // I_inf = 1 / min_{S^{n-1}} ||sigma||_X.
    const double mn = extremize_on_sphere(space, std::max(starts, 64), seed, -1.0);
    e.value = 1.0 / mn;
    e.method = "monte-carlo";
    e.samples = std::max(starts, 64);
    return e;
}

// --- invariants ------------------------------------------------------------

namespace {

// Raw p-th sphere moment avg ||sigma||^p with standard error.
McMoments sphere_moment_raw(const NormedSpace& space, double p, long long count,
                            std::uint64_t seed, int threads) {
    Rng base = Rng(seed).split(0x4d70);
    return mc_accumulate(
        count, threads,
        [&](std::size_t, Rng& rng) { return std::pow(space.norm(sphere_point(space, rng)), p); },
        base);
}

}  // namespace

InvariantEstimate invariant_M_p(const NormedSpace& space, double p, long long count,
                                std::uint64_t seed, int threads) {
    if (std::isinf(p)) return invariant_b(space, 64, seed);
    if (!(p >= 1.0)) throw std::invalid_argument("invariant_M_p: p must be >= 1");
    InvariantEstimate e;
    e.seed = seed;
    if (space.kind() == NormKind::Lp && space.p() == 2.0 && space.identity_scale()) {
        e.value = 1.0;
        e.method = "closed-form";
        return e;
    }
    const McMoments m = sphere_moment_raw(space, p, count, seed, threads);
    e.value = std::pow(m.mean, 1.0 / p);
    e.std_error = m.mean > 0 ? m.std_error * e.value / (p * m.mean) : 0.0;
    e.method = "monte-carlo";
    e.samples = m.samples;
    return e;
}

InvariantEstimate invariant_I_q(const NormedSpace& space, double q, long long count,
                                std::uint64_t seed, int threads) {
    if (!(q > 0.0)) throw std::invalid_argument("invariant_I_q: q must be positive");
    InvariantEstimate e;
    e.seed = seed;
    const int n = space.dim();
    if (space.kind() == NormKind::Lp && space.p() == 2.0 && space.identity_scale()) {
        e.value = std::pow(static_cast<double>(n) / (n + q), 1.0 / q);
        e.method = "closed-form";
        return e;
    }
    BallSampler sampler(space);
    Rng base = Rng(seed).split(0x1c);
    const McMoments m = mc_accumulate(
        count, threads,
        [&](std::size_t, Rng& rng) { return std::pow(space.euclid_norm(sampler.draw(rng)), q); },
        base);
    e.value = std::pow(m.mean, 1.0 / q);
    e.std_error = m.mean > 0 ? m.std_error * e.value / (q * m.mean) : 0.0;
    e.method = "monte-carlo";
    e.samples = m.samples;
    return e;
}

InvariantEstimate ball_volume(const NormedSpace& space, long long count, std::uint64_t seed,
                              int threads) {
    InvariantEstimate e;
    e.seed = seed;
    if (auto cf = space.closed_form_ball_volume()) {
        e.value = *cf;
        e.method = "closed-form";
        return e;
    }
    if (!space.identity_scale())
        throw std::invalid_argument("ball_volume: Monte Carlo path requires identity Euclidean scale");
    const double R = circumradius(space, 64, seed).value * (1.0 + 1e-9);
    const int n = space.dim();
    Rng base = Rng(seed).split(0x70a);
    const McMoments m = mc_accumulate(
        count, threads,
        [&](std::size_t, Rng& rng) {
            Vec g(static_cast<std::size_t>(n));
            double norm2 = 0.0;
            for (auto& v : g) {
                v = rng.normal();
                norm2 += v * v;
            }
            const double r = R * std::pow(rng.uniform(), 1.0 / n);
            const double s = norm2 > 0 ? r / std::sqrt(norm2) : 0.0;
            for (auto& v : g) v *= s;
            return space.norm(g) <= 1.0 ? 1.0 : 0.0;
        },
        base);
    const double envelope = euclidean_ball_volume(n) * std::pow(R, n);
    e.value = envelope * m.mean;
    e.std_error = envelope * m.std_error;
    e.method = "monte-carlo";
    e.samples = m.samples;
    return e;
}

GaussianMomentResult gaussian_norm_moment(const NormedSpace& space, double p, long long count,
                                          std::uint64_t seed, int threads) {
    if (!(p >= 1.0)) throw std::invalid_argument("gaussian_norm_moment: p must be >= 1");
    GaussianMomentResult res;
    const int n = space.dim();
    Rng base = Rng(seed).split(0x6a55);
    const McMoments direct = mc_accumulate(
        count, threads,
        [&](std::size_t, Rng& rng) {
            Vec g(static_cast<std::size_t>(n));
            for (auto& v : g) v = rng.normal();
            return std::pow(space.norm(space.from_reference(g)), p);
        },
        base);
    res.monte_carlo.value = direct.mean;
    res.monte_carlo.std_error = direct.std_error;
    res.monte_carlo.method = "monte-carlo";
    res.monte_carlo.samples = direct.samples;
    res.monte_carlo.seed = seed;

    const double c =
        std::exp(0.5 * p * std::log(2.0) + std::lgamma(0.5 * (n + p)) - std::lgamma(0.5 * n));
    if (space.kind() == NormKind::Lp && space.p() == 2.0 && space.identity_scale()) {
        res.closed_form = c;
        res.closed_form_std_error = 0.0;
    } else {
        const McMoments mp = sphere_moment_raw(space, p, count, seed + 1, threads);
        res.closed_form = c * mp.mean;
        res.closed_form_std_error = c * mp.std_error;
    }
    return res;
}

LmsRatioReport check_lms_ratio(const NormedSpace& space, const std::vector<double>& p_list,
                               long long count, std::uint64_t seed, int threads) {
    LmsRatioReport rep;
    const int n = space.dim();
    const double M = invariant_M_p(space, 1.0, count, seed, threads).value;
    const double b = invariant_b(space, 64, seed + 1).value;
    for (std::size_t i = 0; i < p_list.size(); ++i) {
        const double p = p_list[i];
        if (!(p >= 1.0)) throw std::invalid_argument("check_lms_ratio: p entries must be >= 1");
        const double Mp = invariant_M_p(space, p, count, seed + 2 + i, threads).value;
        const double denom = M + std::sqrt(p / (n + p)) * b;
        const double ratio = Mp / denom;
        rep.p_values.push_back(p);
        rep.ratios.push_back(ratio);
        if (ratio < 1.0 / rep.band_constant || ratio > rep.band_constant) rep.all_in_band = false;
    }
    return rep;
}

UvMomentResult uv_moment(const NormedSpace& U, const NormedSpace& V, double q, long long count,
                         std::uint64_t seed, int threads) {
    if (U.dim() != V.dim()) throw std::invalid_argument("uv_moment: dimension mismatch");
    if (!(q > 0.0)) throw std::invalid_argument("uv_moment: q must be positive");
    const int n = U.dim();
    UvMomentResult res;
    BallSampler sampler(U);
    Rng base = Rng(seed).split(0x0599);
    const McMoments m = mc_accumulate(
        count, threads,
        [&](std::size_t, Rng& rng) { return std::pow(V.norm(sampler.draw(rng)), q); }, base);
    res.moment.value = std::pow(m.mean, 1.0 / q);
    res.moment.std_error = m.mean > 0 ? m.std_error * res.moment.value / (q * m.mean) : 0.0;
    res.moment.method = "monte-carlo";
    res.moment.samples = m.samples;
    res.moment.seed = seed;

    const InvariantEstimate volU = ball_volume(U, count, seed + 7, threads);
    const InvariantEstimate volV = ball_volume(V, count, seed + 8, threads);
    res.lower_bound = std::pow(static_cast<double>(n) / (n + q), 1.0 / q) *
                      std::pow(volU.value / volV.value, 1.0 / n);
    const double rel_vol_se =
        (volU.std_error / volU.value + volV.std_error / volV.value) / n;
    const double bound_se = res.lower_bound * rel_vol_se;
    res.holds_within_3sigma =
        res.moment.value >= res.lower_bound - 3.0 * std::hypot(res.moment.std_error, bound_se);
    return res;
}

ProductLowerBoundResult product_lower_bound(const NormedSpace& space, double p, double q,
                                            long long count, std::uint64_t seed, int threads) {
    if (!(p > 0.0) || !(q > 0.0))
        throw std::invalid_argument("product_lower_bound: p, q must be positive");
    ProductLowerBoundResult res;
    const int n = space.dim();
    res.I_q = invariant_I_q(space, q, count, seed, threads);
    res.M_p = invariant_M_p(space, std::max(p, 1.0), count, seed + 1, threads);
    res.product = res.I_q.value * res.M_p.value;
    res.bound = std::pow(static_cast<double>(n) / (n + q), 1.0 / q);
    const double se =
        std::hypot(res.I_q.std_error * res.M_p.value, res.M_p.std_error * res.I_q.value);
    res.holds_within_3sigma = res.product >= res.bound - 3.0 * se;
    return res;
}

IsotropicResult isotropic_normalize(const NormedSpace& space, long long count, std::uint64_t seed,
                                    int threads) {
    if (!space.identity_scale())
        throw std::invalid_argument("isotropic_normalize: expects the identity Euclidean structure");
    const int n = space.dim();
    IsotropicResult res;

    NormedSpace body = space;
    // Second moments of the body measure, int_B x_i^2 dx (diagonal for the
    // coordinate-symmetric kinds).
    std::vector<double> c(static_cast<std::size_t>(n), 0.0);
    double vol = 0.0;
    bool closed = true;
    if (auto v = space.closed_form_ball_volume()) {
        vol = *v;
        for (int i = 0; i < n; ++i)
            c[static_cast<std::size_t>(i)] = *space.closed_form_second_moment(i);
    } else {
        closed = false;
        const long long nsamp = std::max<long long>(count, 20000);
        std::vector<Vec> pts = sample_ball(space, nsamp, seed);
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
        for (const auto& x : pts)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    C(i, j) += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(j)];
        C /= static_cast<double>(nsamp);
        double offdiag = 0.0, diag = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) (i == j ? diag : offdiag) += std::abs(C(i, j));
        if (offdiag > 0.02 * diag && space.kind() == NormKind::Polytope) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
            const Eigen::MatrixXd Q = es.eigenvectors();
            std::vector<Vec> rotated;
            for (const auto& f : space.facets()) {
                Vec g(static_cast<std::size_t>(n), 0.0);
                // Body rotates by Q^T; functionals follow the same rotation.
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        g[static_cast<std::size_t>(i)] += Q(j, i) * f[static_cast<std::size_t>(j)];
                rotated.push_back(std::move(g));
            }
            body = NormedSpace::polytope(n, rotated);
            res.covariance_diagonalized = true;
            for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
        } else {
            for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = C(i, i);
        }
        vol = ball_volume(space, std::max<long long>(count, 200000), seed + 3, threads).value;
        for (auto& ci : c) ci *= vol;  // sample average -> measure integral
    }

    // B' = T B with T = lambda diag(1/sqrt(c_i)); the unit-volume condition
    // fixes lambda, and the transformed second moments are all equal.
    double log_prod_c = 0.0;
    for (double ci : c) log_prod_c += std::log(ci);
    const double lambda = std::pow(std::exp(0.5 * log_prod_c) / vol, 1.0 / n);
    Vec t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        t[static_cast<std::size_t>(i)] = lambda / std::sqrt(c[static_cast<std::size_t>(i)]);

    NormedSpace scaled = [&]() {
        switch (body.kind()) {
            case NormKind::Lp: {
                Vec w(static_cast<std::size_t>(n));
                for (int i = 0; i < n; ++i)
                    w[static_cast<std::size_t>(i)] = 1.0 / t[static_cast<std::size_t>(i)];
                return NormedSpace::diag_lp(n, body.p(), w);
            }
            case NormKind::DiagLp: {
                Vec w = body.weights();
                for (int i = 0; i < n; ++i)
                    w[static_cast<std::size_t>(i)] /= t[static_cast<std::size_t>(i)];
                return NormedSpace::diag_lp(n, body.p(), w);
            }
            case NormKind::Polytope: {
                std::vector<Vec> facets = body.facets();
                for (auto& f : facets)
                    for (int i = 0; i < n; ++i)
                        f[static_cast<std::size_t>(i)] /= t[static_cast<std::size_t>(i)];
                return NormedSpace::polytope(n, facets);
            }
        }
        return body;
    }();

    res.body = scaled;
    res.method = closed ? "closed-form" : "monte-carlo";
    // L_X^2 = det(T) t_i^2 c_i, identical across i by construction.
    double log_det_t = 0.0;
    for (double ti : t) log_det_t += std::log(ti);
    res.L_X = std::sqrt(std::exp(log_det_t) * t[0] * t[0] * c[0]);

    // Direction-independence of (int_{B'} (x.y)^2 dx)^{1/2} / |y|.
    const long long nsamp = std::max<long long>(count, 20000);
    std::vector<Vec> pts = sample_ball(scaled, nsamp, seed + 11);
    Rng dir_rng = Rng(seed).split(0xd12);
    double lo = 1e300, hi = -1e300, mean_acc = 0.0;
    const int ndirs = 16;
    for (int d = 0; d < ndirs; ++d) {
        Vec y = round_sphere_point(n, dir_rng);
        std::vector<double> vals(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double s = dot(pts[i], y);
            vals[i] = s * s;
        }
        const double m = pairwise_sum(vals) / static_cast<double>(pts.size());
        const double Ld = std::sqrt(m);  // |B'| = 1, so the average is the integral
        lo = std::min(lo, Ld);
        hi = std::max(hi, Ld);
        mean_acc += Ld;
    }
    mean_acc /= ndirs;
    res.direction_spread = mean_acc > 0 ? (hi - lo) / mean_acc : 0.0;
    return res;
}

}  // namespace heatlab::spaces
