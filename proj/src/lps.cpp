#include "heatlab/lps.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "heatlab/numeric.hpp"

namespace heatlab::lps {

ScaleGrid::ScaleGrid(double tmin, double tmax, int npoints)
    : t_min(tmin), t_max(tmax), points(npoints) {
    if (!(t_min > 0.0)) throw std::invalid_argument("ScaleGrid: t_min must be positive");
    if (!(t_max > t_min)) throw std::invalid_argument("ScaleGrid: t_max must exceed t_min");
    if (points < 16) throw std::invalid_argument("ScaleGrid: need at least 16 points");
}

ScaleGrid ScaleGrid::per_decade(double tmin, double tmax, int density) {
    const double decades = std::log10(tmax / tmin);
    const int points = std::max(16, static_cast<int>(std::ceil(decades * density)) + 1);
    return ScaleGrid(tmin, tmax, points);
}

std::vector<double> ScaleGrid::nodes() const {
    std::vector<double> t(static_cast<std::size_t>(points));
    const double lv = std::log(t_min), hv = std::log(t_max);
    for (int k = 0; k < points; ++k)
        t[static_cast<std::size_t>(k)] = std::exp(lv + (hv - lv) * k / (points - 1));
    return t;
}

std::vector<double> ScaleGrid::weights() const {
    const double dv = (std::log(t_max) - std::log(t_min)) / (points - 1);
    std::vector<double> w(static_cast<std::size_t>(points), dv);
    w.front() *= 0.5;
    w.back() *= 0.5;
    return w;
}

ScaleGrid ScaleGrid::extended(double t_limit) const {
    const double dv = (std::log(t_max) - std::log(t_min)) / (points - 1);
    const int extra = std::max(1, static_cast<int>(std::round(std::log(2.0) / dv)));
    double new_max = std::exp(std::log(t_max) + extra * dv);
    int hi_extra = extra;
    while (hi_extra > 0 && new_max > t_limit) {
        --hi_extra;
        new_max = std::exp(std::log(t_max) + hi_extra * dv);
    }
    const double new_min = std::exp(std::log(t_min) - extra * dv);
    ScaleGrid g;
    g.t_min = new_min;
    g.t_max = new_max;
    g.points = points + extra + hi_extra;
    return g;
}

namespace {

// Generic q-functional over a scale grid: value = (sum w_k lq_norm_k^q)^{1/q},
// where each node's field is produced by `node_field`. Parallel over nodes
// with a deterministic final reduction.
double scale_functional(const ScaleGrid& grid, double q, double pout, int threads,
                        const std::function<GridField(double)>& node_field) {
    const auto t = grid.nodes();
    const auto w = grid.weights();
    std::vector<double> terms(t.size());
    parallel_for(t.size(), threads, [&](std::size_t k) {
        const GridField g = node_field(t[k]);
        terms[k] = w[k] * std::pow(g.lq_norm(q, pout), q);
    });
    return std::pow(pairwise_sum(terms), 1.0 / q);
}

void require_q(double q) {
    if (!(q >= 2.0)) throw std::invalid_argument("g-functional: q must be >= 2");
}

}  // namespace

FunctionalReport temporal_g(const GridField& f, double q, const ScaleGrid& grid, double pout,
                            int threads) {
    require_q(q);
    const double limit = heat::heat_time_limit(f);
    if (grid.t_max > limit)
        throw heat::AdmissibilityError("temporal_g: scale grid exceeds the heat range");
    Spectral spec(f);
    auto node = [&](double t) {
        return spec.apply_radial([t](double xi2) { return t * xi2 * std::exp(-t * xi2); });
    };
    FunctionalReport rep;
    rep.scale_grid = grid;
    rep.value = scale_functional(grid, q, pout, threads, node);
    const double ext = scale_functional(grid.extended(limit), q, pout, threads, node);
    rep.discretization_error_estimate = std::abs(ext - rep.value);
    return rep;
}

double sphere_avg_directional_norm(const GridField& vec_f, double q, int dirs,
                                   std::uint64_t seed) {
    const int n = vec_f.dim_in();
    if (vec_f.dim_out() != n)
        throw std::invalid_argument("sphere_avg_directional_norm: need m = n components");
    const auto sigmas = spaces::sample_sphere(spaces::NormedSpace::lp(n, 2.0), dirs, seed);
    std::vector<double> vals(sigmas.size());
    for (std::size_t s = 0; s < sigmas.size(); ++s) {
        // || sigma . fvec ||_{L_q}
        double acc = 0.0;
        for (std::size_t p = 0; p < vec_f.num_points(); ++p) {
            double v = 0.0;
            for (int c = 0; c < n; ++c)
                v += sigmas[s][static_cast<std::size_t>(c)] * vec_f.value(p, c);
            acc += std::pow(std::abs(v), q);
        }
        double cell = 1.0;
        for (int d = 0; d < n; ++d) cell *= vec_f.spacing();
        vals[s] = std::pow(acc * cell, 1.0 / q);
    }
    return pairwise_sum(vals) / static_cast<double>(vals.size());
}

FunctionalReport spatial_div_g(const GridField& vec_f, double q, const ScaleGrid& grid,
                               int sphere_dirs, std::uint64_t seed, int threads) {
    require_q(q);
    if (vec_f.dim_out() != vec_f.dim_in())
        throw std::invalid_argument("spatial_div_g: need m = n components");
    const double limit = heat::heat_time_limit(vec_f);
    if (grid.t_max > limit)
        throw heat::AdmissibilityError("spatial_div_g: scale grid exceeds the heat range");
    Spectral spec(vec_f);
    auto node = [&](double t) {
        const double st = std::sqrt(t);
        return spec.apply_divergence([t, st](double xi2) { return st * std::exp(-t * xi2); });
    };
    FunctionalReport rep;
    rep.scale_grid = grid;
    rep.value = scale_functional(grid, q, 2.0, threads, node);
    const double ext = scale_functional(grid.extended(limit), q, 2.0, threads, node);
    rep.discretization_error_estimate = std::abs(ext - rep.value);
    const double n = vec_f.dim_in();
    rep.bound_value = std::sqrt(n) * sphere_avg_directional_norm(vec_f, q, sphere_dirs, seed);
    rep.ratio = *rep.bound_value > 0 ? rep.value / *rep.bound_value : 0.0;
    return rep;
}

DirectionalReport directional_g(const GridField& f, const Vec& z, double q, const ScaleGrid& grid,
                                double pout, int threads) {
    require_q(q);
    const double limit = heat::heat_time_limit(f);
    if (grid.t_max > limit)
        throw heat::AdmissibilityError("directional_g: scale grid exceeds the heat range");
    Spectral spec(f);
    auto node = [&](double t) {
        const double st = std::sqrt(t);
        return spec.apply_directional(z, [t, st](double xi2) { return st * std::exp(-t * xi2); });
    };
    DirectionalReport out;
    out.functional.scale_grid = grid;
    out.functional.value = scale_functional(grid, q, pout, threads, node);
    const double ext = scale_functional(grid.extended(limit), q, pout, threads, node);
    out.functional.discretization_error_estimate = std::abs(ext - out.functional.value);

    const auto t = grid.nodes();
    std::vector<double> sups(t.size());
    parallel_for(t.size(), threads, [&](std::size_t k) {
        sups[k] = node(t[k]).lq_norm(q, pout);
    });
    out.single_t_sup = *std::max_element(sups.begin(), sups.end());
    double z2 = 0.0;
    for (double v : z) z2 += v * v;
    out.single_t_bound = std::sqrt(z2 / M_PI) * f.lq_norm(q, pout);
    return out;
}

FunctionalReport difference_g(const GridField& f, double alpha, double q, const ScaleGrid& grid,
                              double pout, int threads) {
    require_q(q);
    if (!(alpha > 1.0)) throw std::invalid_argument("difference_g: alpha must exceed 1");
    const double limit = heat::heat_time_limit(f);
    if (grid.t_max * alpha > limit)
        throw heat::AdmissibilityError("difference_g: alpha * t_max exceeds the heat range");
    Spectral spec(f);
    auto node = [&](double t) {
        return spec.apply_radial(
            [t, alpha](double xi2) { return std::exp(-t * xi2) - std::exp(-alpha * t * xi2); });
    };
    FunctionalReport rep;
    rep.scale_grid = grid;
    rep.value = scale_functional(grid, q, pout, threads, node);
    const double ext = scale_functional(grid.extended(limit / alpha), q, pout, threads, node);
    rep.discretization_error_estimate = std::abs(ext - rep.value);
    if (q == 2.0 && f.dim_out() == 1) {
        const double frullani = std::log((1.0 + alpha) * (1.0 + alpha) / (4.0 * alpha));
        rep.bound_value = std::sqrt(frullani) * f.lq_norm(2.0, pout);
        rep.ratio = *rep.bound_value > 0 ? rep.value / *rep.bound_value : 0.0;
    }
    return rep;
}

SingleTimeDivReport spatial_div_single_t(const GridField& vec_f, double t, double q,
                                         int sphere_dirs, std::uint64_t seed) {
    if (vec_f.dim_out() != vec_f.dim_in())
        throw std::invalid_argument("spatial_div_single_t: need m = n components");
    if (t > heat::heat_time_limit(vec_f))
        throw heat::AdmissibilityError("spatial_div_single_t: t exceeds the heat range");
    Spectral spec(vec_f);
    const double st = std::sqrt(t);
    const GridField g =
        spec.apply_divergence([t, st](double xi2) { return st * std::exp(-t * xi2); });
    SingleTimeDivReport rep;
    rep.value = g.lq_norm(q, 2.0);
    const int n = vec_f.dim_in();
    const double gamma_ratio = std::exp(std::lgamma(0.5 * (n + 1)) - std::lgamma(0.5 * n));
    rep.bound = gamma_ratio * sphere_avg_directional_norm(vec_f, q, sphere_dirs, seed);
    rep.ratio = rep.bound > 0 ? rep.value / rep.bound : 0.0;
    return rep;
}

PisierReport pisier_martingale_test(double q, int m, int depth, long long trials,
                                    std::uint64_t seed, int threads) {
    if (!(q >= 2.0)) throw std::invalid_argument("pisier_martingale_test: q must be >= 2");
    if (depth < 2 || depth > 16)
        throw std::invalid_argument("pisier_martingale_test: depth must be in [2, 16]");
    if (m < 1) throw std::invalid_argument("pisier_martingale_test: m must be positive");

    PisierReport rep;
    rep.trials = trials;
    rep.histogram.assign(40, 0);
    std::vector<double> ratios(static_cast<std::size_t>(trials));

    Rng base = Rng(seed).split(0x9151e7);
    parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t trial) {
        Rng rng = base.split(trial);
        const std::size_t mm = static_cast<std::size_t>(m);
        // Level k holds 2^k node values; the root value is the constant M_1.
        std::vector<double> level(mm);
        for (auto& v : level) v = rng.uniform(-1.0, 1.0);

        auto level_norm_q = [&](const std::vector<double>& vals, std::size_t nodes) {
            // ||M_k||_{L_q(mu; l_q^m)}^q with uniform weight on nodes.
            double acc = 0.0;
            for (std::size_t node = 0; node < nodes; ++node) {
                double ynq = 0.0;
                for (std::size_t c = 0; c < mm; ++c)
                    ynq += std::pow(std::abs(vals[node * mm + c]), q);
                acc += ynq;
            }
            return acc / static_cast<double>(nodes);
        };

        double sup_norm_q = level_norm_q(level, 1);
        double increments_q = 0.0;
        const double step_scale = 1.0 / depth;

        for (int k = 1; k < depth; ++k) {
            const std::size_t parents = static_cast<std::size_t>(1) << (k - 1);
            std::vector<double> next(parents * 2 * mm);
            double inc_acc = 0.0;
            for (std::size_t parent = 0; parent < parents; ++parent) {
                double dnq = 0.0;
                for (std::size_t c = 0; c < mm; ++c) {
                    const double d = step_scale * rng.uniform(-1.0, 1.0);
                    dnq += std::pow(std::abs(d), q);
                    next[(2 * parent) * mm + c] = level[parent * mm + c] + d;
                    next[(2 * parent + 1) * mm + c] = level[parent * mm + c] - d;
                }
                inc_acc += dnq;
            }
            increments_q += inc_acc / static_cast<double>(parents);
            level = std::move(next);
            sup_norm_q = std::max(sup_norm_q, level_norm_q(level, parents * 2));
        }
        const double sup = std::pow(sup_norm_q, 1.0 / q);
        ratios[trial] = sup > 0 ? std::pow(increments_q, 1.0 / q) / sup : 0.0;
    });

    double sum = 0.0;
    for (double r : ratios) {
        rep.max_ratio = std::max(rep.max_ratio, r);
        sum += r;
        const int bin = std::min(39, static_cast<int>(r / rep.bin_width));
        ++rep.histogram[static_cast<std::size_t>(bin)];
    }
    rep.mean_ratio = sum / static_cast<double>(trials);
    return rep;
}

}  // namespace heatlab::lps
