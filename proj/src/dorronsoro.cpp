#include "heatlab/dorronsoro.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "heatlab/numeric.hpp"

namespace heatlab::dorro {

namespace {

double halton(std::size_t index, int base) {
    double f = 1.0, r = 0.0;
    std::size_t i = index + 1;
    while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % static_cast<std::size_t>(base));
        i /= static_cast<std::size_t>(base);
    }
    return r;
}

double y_norm(const double* v, int m, double pout) {
    if (m == 1) return std::abs(v[0]);
    if (pout == 2.0) {
        double s = 0.0;
        for (int c = 0; c < m; ++c) s += v[c] * v[c];
        return std::sqrt(s);
    }
    if (std::isinf(pout)) {
        double s = 0.0;
        for (int c = 0; c < m; ++c) s = std::max(s, std::abs(v[c]));
        return s;
    }
    double s = 0.0;
    for (int c = 0; c < m; ++c) s += std::pow(std::abs(v[c]), pout);
    return std::pow(s, 1.0 / pout);
}

}  // namespace

std::vector<Vec> ball_point_set(const NormedSpace& X, int count, std::uint64_t seed) {
    const int n = X.dim();
    std::vector<Vec> pts;
    pts.reserve(static_cast<std::size_t>(count));
    if (n == 1) {
        // Any symmetric 1-d ball is an interval [-c, c]; midpoint set.
        const double c = 1.0 / X.norm(Vec{1.0});
        for (int j = 0; j < count; ++j)
            pts.push_back(Vec{c * (-1.0 + 2.0 * (j + 0.5) / count)});
        return pts;
    }
    const bool l2 = X.kind() == spaces::NormKind::Lp && X.p() == 2.0 && X.identity_scale();
    const bool cube = X.kind() == spaces::NormKind::Lp && std::isinf(X.p()) && X.identity_scale();
    if (l2 && n == 2) {
        // Fibonacci disc: equal-area radial map against the golden angle.
        const double golden = M_PI * (3.0 - std::sqrt(5.0));
        for (int j = 0; j < count; ++j) {
            const double r = std::sqrt((j + 0.5) / count);
            const double th = golden * j;
            pts.push_back(Vec{r * std::cos(th), r * std::sin(th)});
        }
        return pts;
    }
    if (l2 && n == 3) {
        for (int j = 0; j < count; ++j) {
            const double r = std::cbrt(halton(static_cast<std::size_t>(j), 2));
            const double z = 2.0 * halton(static_cast<std::size_t>(j), 3) - 1.0;
            const double phi = 2.0 * M_PI * halton(static_cast<std::size_t>(j), 5);
            const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            pts.push_back(Vec{r * rho * std::cos(phi), r * rho * std::sin(phi), r * z});
        }
        return pts;
    }
    if (cube) {
        static const int bases[4] = {2, 3, 5, 7};
        for (int j = 0; j < count; ++j) {
            Vec x(static_cast<std::size_t>(n));
            for (int d = 0; d < n; ++d)
                x[static_cast<std::size_t>(d)] = 2.0 * halton(static_cast<std::size_t>(j), bases[d]) - 1.0;
            pts.push_back(std::move(x));
        }
        return pts;
    }
    return spaces::sample_ball(X, count, seed);
}

namespace {

struct XDomain {
    std::vector<std::size_t> points;  // grid indices
    double cell_weight = 0.0;         // (h * stride)^n
};

// Grid x-points covering the support mask dilated by `dilate_cells`, on the
// given stride; an explicit window overrides the mask-derived box.
XDomain x_domain(const GridField& f, int stride, int dilate_cells,
                 const std::vector<std::pair<double, double>>& window) {
    const int n = f.dim_in();
    const int res = f.res();
    std::vector<int> lo(static_cast<std::size_t>(n), res), hi(static_cast<std::size_t>(n), -1);
    if (!window.empty()) {
        for (int d = 0; d < n; ++d) {
            lo[static_cast<std::size_t>(d)] = std::max(
                0, static_cast<int>(std::ceil((window[static_cast<std::size_t>(d)].first - f.box_a()) / f.spacing())));
            hi[static_cast<std::size_t>(d)] = std::min(
                res - 1,
                static_cast<int>(std::floor((window[static_cast<std::size_t>(d)].second - f.box_a()) / f.spacing())));
        }
    } else {
        const auto mask = f.support_mask();
        std::vector<int> multi(static_cast<std::size_t>(n));
        for (std::size_t p = 0; p < mask.size(); ++p) {
            if (!mask[p]) continue;
            f.point_multi(p, multi);
            for (int d = 0; d < n; ++d) {
                lo[static_cast<std::size_t>(d)] =
                    std::min(lo[static_cast<std::size_t>(d)], multi[static_cast<std::size_t>(d)]);
                hi[static_cast<std::size_t>(d)] =
                    std::max(hi[static_cast<std::size_t>(d)], multi[static_cast<std::size_t>(d)]);
            }
        }
        if (hi[0] < 0) return {};  // zero field
        for (int d = 0; d < n; ++d) {
            lo[static_cast<std::size_t>(d)] = std::max(0, lo[static_cast<std::size_t>(d)] - dilate_cells);
            hi[static_cast<std::size_t>(d)] = std::min(res - 1, hi[static_cast<std::size_t>(d)] + dilate_cells);
        }
    }
    XDomain dom;
    if (hi[0] < lo[0]) return dom;
    std::vector<int> cur = lo;
    for (;;) {
        dom.points.push_back(f.point_index(cur));
        int d = n - 1;
        for (; d >= 0; --d) {
            cur[static_cast<std::size_t>(d)] += stride;
            if (cur[static_cast<std::size_t>(d)] <= hi[static_cast<std::size_t>(d)]) break;
            cur[static_cast<std::size_t>(d)] = lo[static_cast<std::size_t>(d)];
        }
        if (d < 0) break;
    }
    dom.cell_weight = 1.0;
    for (int d = 0; d < n; ++d) dom.cell_weight *= f.spacing() * stride;
    return dom;
}

struct CellAccumulators {
    double total = 0.0;
    double j1 = 0.0;
    double j2 = 0.0;
    std::vector<std::pair<double, double>> per_scale;
};

// Core (x, t) double loop shared by carleson_functional and j_split. Computes
// sum over (x, t, z) of w_t (h s)^n / (t^q K) * ||.||^q for the three
// integrands.
CellAccumulators carleson_core(const GridField& f, const DorroConfig& cfg, double gamma,
                               bool with_split) {
    const int n = f.dim_in();
    const int m = f.dim_out();
    const auto tnodes = cfg.scale_grid.nodes();
    const auto tweights = cfg.scale_grid.weights();
    if (gamma * cfg.scale_grid.t_max * cfg.scale_grid.t_max > heat::heat_time_limit(f))
        throw heat::AdmissibilityError(
            "carleson_functional: gamma t_max^2 exceeds the admissible heat range");

    const std::vector<Vec> zset = ball_point_set(cfg.X, cfg.ball_samples, cfg.seed);
    const double R_X = spaces::circumradius(cfg.X, 64, cfg.seed).value;
    const int dilate =
        static_cast<int>(std::ceil(cfg.scale_grid.t_max * R_X / f.spacing())) + 1;
    const XDomain dom = x_domain(f, cfg.x_stride, dilate, cfg.x_window);

    heat::Spectral spec(f);

    std::vector<CellAccumulators> per_t(tnodes.size());
    parallel_for(tnodes.size(), cfg.threads, [&](std::size_t ti) {
        const double t = tnodes[ti];
        const heat::Evolute ev = heat::heat_convolve(spec, f, gamma * t * t, true);
        std::vector<double> fy(static_cast<std::size_t>(m));
        std::vector<double> ex(static_cast<std::size_t>(m));       // E at the center x
        std::vector<double> ey(static_cast<std::size_t>(m));       // E at y (split only)
        std::vector<double> lam(static_cast<std::size_t>(m));      // Lambda(y)
        std::vector<double> diff(static_cast<std::size_t>(m));
        std::vector<double> grad(static_cast<std::size_t>(n * m));
        Vec y(static_cast<std::size_t>(n));
        double acc_total = 0.0, acc_j1 = 0.0, acc_j2 = 0.0;
        for (const std::size_t p : dom.points) {
            const Vec x = f.point_coords(p);
            // Taylor data at the grid point (exact, no interpolation).
            for (int c = 0; c < m; ++c) ex[static_cast<std::size_t>(c)] = ev.values.value(p, c);
            for (int j = 0; j < n * m; ++j) grad[static_cast<std::size_t>(j)] = ev.gradient.value(p, j);
            double cell_total = 0.0, cell_j1 = 0.0, cell_j2 = 0.0;
            for (const Vec& z : zset) {
                for (int d = 0; d < n; ++d)
                    y[static_cast<std::size_t>(d)] = x[static_cast<std::size_t>(d)] + t * z[static_cast<std::size_t>(d)];
                f.eval(y, fy.data());
                for (int c = 0; c < m; ++c) {
                    double v = ex[static_cast<std::size_t>(c)];
                    for (int d = 0; d < n; ++d)
                        v += t * z[static_cast<std::size_t>(d)] * grad[static_cast<std::size_t>(d * m + c)];
                    lam[static_cast<std::size_t>(c)] = v;
                    diff[static_cast<std::size_t>(c)] = fy[static_cast<std::size_t>(c)] - v;
                }
                cell_total += std::pow(y_norm(diff.data(), m, cfg.pout), cfg.q);
                if (with_split) {
                    ev.values.eval(y, ey.data());
                    for (int c = 0; c < m; ++c)
                        diff[static_cast<std::size_t>(c)] =
                            fy[static_cast<std::size_t>(c)] - ey[static_cast<std::size_t>(c)];
                    cell_j2 += std::pow(y_norm(diff.data(), m, cfg.pout), cfg.q);
                    for (int c = 0; c < m; ++c)
                        diff[static_cast<std::size_t>(c)] =
                            ey[static_cast<std::size_t>(c)] - lam[static_cast<std::size_t>(c)];
                    cell_j1 += std::pow(y_norm(diff.data(), m, cfg.pout), cfg.q);
                }
            }
            const double scale = 1.0 / static_cast<double>(zset.size());
            acc_total += cell_total * scale;
            acc_j1 += cell_j1 * scale;
            acc_j2 += cell_j2 * scale;
        }
        const double factor = tweights[ti] * dom.cell_weight / std::pow(t, cfg.q);
        per_t[ti].total = acc_total * factor;
        per_t[ti].j1 = acc_j1 * factor;
        per_t[ti].j2 = acc_j2 * factor;
    });

    CellAccumulators out;
    std::vector<double> tmp(per_t.size());
    for (std::size_t i = 0; i < per_t.size(); ++i) tmp[i] = per_t[i].total;
    out.total = pairwise_sum(tmp);
    for (std::size_t i = 0; i < per_t.size(); ++i) tmp[i] = per_t[i].j1;
    out.j1 = pairwise_sum(tmp);
    for (std::size_t i = 0; i < per_t.size(); ++i) tmp[i] = per_t[i].j2;
    out.j2 = pairwise_sum(tmp);
    out.per_scale.reserve(per_t.size());
    for (std::size_t i = 0; i < per_t.size(); ++i)
        out.per_scale.emplace_back(tnodes[i], per_t[i].total);
    return out;
}

double resolve_gamma(const GridField& f, const DorroConfig& cfg) {
    return cfg.gamma ? *cfg.gamma : optimal_gamma(f, cfg);
}

}  // namespace

CarlesonReport carleson_functional(const GridField& f, const DorroConfig& cfg) {
    const double gamma = resolve_gamma(f, cfg);
    const CellAccumulators acc = carleson_core(f, cfg, gamma, false);
    CarlesonReport rep;
    rep.gamma = gamma;
    rep.per_scale = acc.per_scale;
    rep.scale_grid = cfg.scale_grid;
    rep.value = std::pow(acc.total, 1.0 / cfg.q);

    // Top-scale doubling for the truncation estimate (capped by heat range).
    DorroConfig ext = cfg;
    ext.gamma = gamma;
    const double t_cap = std::sqrt(heat::heat_time_limit(f) / gamma);
    ext.scale_grid = cfg.scale_grid.extended(t_cap * 0.999);
    const CellAccumulators acc2 = carleson_core(f, ext, gamma, false);
    rep.discretization_error_estimate = std::abs(std::pow(acc2.total, 1.0 / cfg.q) - rep.value);

    const int n = f.dim_in();
    const double K = K_constant(cfg.q, n, cfg.X, 1.0, 1.0, 200000, cfg.seed);
    const double lip = fields::lipschitz_constant(f, cfg.X, cfg.pout);
    const double supp = fields::support_volume(f);
    rep.bound_value = K * std::pow(supp, 1.0 / cfg.q) * lip;
    rep.ratio = *rep.bound_value > 0 ? rep.value / *rep.bound_value : 0.0;
    return rep;
}

JSplit j_split(const GridField& f, const DorroConfig& cfg) {
    const double gamma = resolve_gamma(f, cfg);
    const CellAccumulators acc = carleson_core(f, cfg, gamma, true);
    JSplit s;
    s.gamma = gamma;
    s.total = std::pow(acc.total, 1.0 / cfg.q);
    s.J1 = std::pow(acc.j1, 1.0 / cfg.q);
    s.J2 = std::pow(acc.j2, 1.0 / cfg.q);
    return s;
}

double optimal_gamma_from_moments(const NormedSpace& X, double q,
                                  const std::function<double(const Vec&)>& dirnorm_ball,
                                  const std::function<double(const Vec&)>& dirnorm_sphere,
                                  long long ball_count, long long sphere_count,
                                  std::uint64_t seed) {
    const int n = X.dim();
    const std::vector<Vec> ball = sample_ball(X, ball_count, seed);
    std::vector<double> num_terms(ball.size());
    for (std::size_t i = 0; i < ball.size(); ++i) {
        const double dn = dirnorm_ball(ball[i]);
        num_terms[i] = std::pow(X.euclid_norm(ball[i]), q) * std::pow(dn, q);
    }
    const double num = std::pow(pairwise_sum(num_terms) / static_cast<double>(ball.size()), 1.0 / q);

    const std::vector<Vec> sph = spaces::sample_sphere(X, sphere_count, seed + 1);
    std::vector<double> den_terms(sph.size());
    for (std::size_t i = 0; i < sph.size(); ++i) den_terms[i] = dirnorm_sphere(sph[i]);
    const double den = pairwise_sum(den_terms) / static_cast<double>(sph.size());
    if (!(den > 0.0)) throw std::invalid_argument("optimal_gamma: vanishing gradient moments");
    return num / (std::sqrt(static_cast<double>(n)) * den);
}

double optimal_gamma(const GridField& f, const DorroConfig& cfg) {
    const int n = f.dim_in();
    const int m = f.dim_out();
    const GridField grad = heat::gradient(f);
    double cell = 1.0;
    for (int d = 0; d < n; ++d) cell *= f.spacing();
    // ||z . grad f||_{L_q} for a direction z.
    auto dirnorm = [&](const Vec& z) {
        double acc = 0.0;
        std::vector<double> v(static_cast<std::size_t>(m));
        for (std::size_t p = 0; p < grad.num_points(); ++p) {
            for (int c = 0; c < m; ++c) {
                double s = 0.0;
                for (int d = 0; d < n; ++d)
                    s += z[static_cast<std::size_t>(d)] * grad.value(p, d * m + c);
                v[static_cast<std::size_t>(c)] = s;
            }
            acc += std::pow(y_norm(v.data(), m, cfg.pout), cfg.q);
        }
        return std::pow(acc * cell, 1.0 / cfg.q);
    };
    const long long ball_count = std::max(64, cfg.ball_samples);
    return optimal_gamma_from_moments(cfg.X, cfg.q, dirnorm, dirnorm, ball_count, 64, cfg.seed);
}

double K_constant(double q, int n, const NormedSpace& X, double m_q, double kappa,
                  long long count, std::uint64_t seed) {
    if (!(q > 0.0) || !(m_q > 0.0) || !(kappa > 0.0) || n < 1)
        throw std::invalid_argument("K_constant: parameters must be positive");
    const double Iq = spaces::invariant_I_q(X, q, count, seed).value;
    const double M = spaces::invariant_M_p(X, 1.0, count, seed + 1).value;
    return kappa * std::pow(static_cast<double>(n), 0.25) * m_q * std::sqrt(Iq * M);
}

double local_scale_T(double q, int n, const NormedSpace& X, long long count, std::uint64_t seed) {
    const double Iq = spaces::invariant_I_q(X, q, count, seed).value;
    const double M = spaces::invariant_M_p(X, 1.0, count, seed + 1).value;
    const double c = 0.25;  // the paper's constant lies in (0, 1/4]
    const double T = c / (std::pow(static_cast<double>(n), 1.25) *
                          std::sqrt(Iq * M * spaces::log_dim(n)));
    if (T > 1.0 / (2.0 * n))
        throw std::logic_error("local_scale_T: T exceeds 1/(2n); inadmissible configuration");
    return T;
}

GridField extend_to_global(const GridField& f_on_ball, const NormedSpace& X, int out_res) {
    const int n = f_on_ball.dim_in();
    const int m = f_on_ball.dim_out();
    const double R = spaces::circumradius(X, 64, 0x5eed).value;
    const double support_radius = (1.0 + 1.0 / n) * R;
    const double half = support_radius / 0.7;  // support sits inside the padding layer
    GridField F(n, m, -half, half, out_res);

    std::vector<double> c0(static_cast<std::size_t>(m));
    f_on_ball.eval(Vec(static_cast<std::size_t>(n), 0.0), c0.data());

    std::vector<double> buf(static_cast<std::size_t>(m));
    F.fill([&](const Vec& x, double* out) {
        const double nx = X.norm(x);
        if (nx <= 1.0) {
            f_on_ball.eval(x, buf.data());
            for (int c = 0; c < m; ++c) out[c] = buf[static_cast<std::size_t>(c)] - c0[static_cast<std::size_t>(c)];
            return;
        }
        const double w = std::max(0.0, n + 1.0 - n * nx);
        if (w == 0.0) {
            for (int c = 0; c < m; ++c) out[c] = 0.0;
            return;
        }
        Vec bx(x.size());
        for (std::size_t d = 0; d < x.size(); ++d) bx[d] = x[d] / nx;
        f_on_ball.eval(bx, buf.data());
        for (int c = 0; c < m; ++c) out[c] = w * (buf[static_cast<std::size_t>(c)] - c0[static_cast<std::size_t>(c)]);
    });

    // Contract checks: supp F inside (1+1/n) B_X and the Lipschitz bound of
    // the extension, with grid slack.
    std::vector<int> multi(static_cast<std::size_t>(n));
    for (std::size_t p = 0; p < F.num_points(); ++p) {
        bool nonzero = false;
        for (int c = 0; c < m; ++c) nonzero |= F.value(p, c) != 0.0;
        if (!nonzero) continue;
        const Vec x = F.point_coords(p);
        if (X.norm(x) > (1.0 + 1.0 / n) * (1.0 + 4.0 * F.spacing()))
            throw std::logic_error("extend_to_global: support escaped (1+1/n) B_X");
    }
    const double base_lip = fields::lipschitz_constant(f_on_ball, X);
    const double lip = fields::lipschitz_constant(F, X);
    const double slack = 1.0 + 40.0 * F.spacing();
    if (base_lip > 0.0 && lip > (n + 2.0) * std::max(base_lip, 1.0) * slack)
        throw std::logic_error("extend_to_global: Lipschitz bound (n+2) violated");
    return F;
}

namespace {

struct LocalScanContext {
    GridField F;
    double gamma = 0.0;
    std::vector<Vec> zset;
    std::vector<std::size_t> xpoints;  // indices into F's grid
    heat::LipThresholdConstants lip_consts;
};

LocalScanContext make_local_context(const GridField& f_on_ball, const DorroConfig& cfg) {
    LocalScanContext ctx;
    const int n = f_on_ball.dim_in();
    ctx.F = extend_to_global(f_on_ball, cfg.X, f_on_ball.res());
    DorroConfig gcfg = cfg;
    ctx.gamma = cfg.gamma ? *cfg.gamma : optimal_gamma(ctx.F, gcfg);
    ctx.zset = ball_point_set(cfg.X, cfg.ball_samples, cfg.seed);
    const double inner = 1.0 - 1.0 / (2.0 * n);
    std::vector<int> multi(static_cast<std::size_t>(n));
    for (std::size_t p = 0; p < ctx.F.num_points(); ++p) {
        bool keep = true;
        ctx.F.point_multi(p, multi);
        for (int d = 0; d < n; ++d)
            if (multi[static_cast<std::size_t>(d)] % cfg.x_stride != 0) keep = false;
        if (!keep) continue;
        if (cfg.X.norm(ctx.F.point_coords(p)) <= inner) ctx.xpoints.push_back(p);
    }
    ctx.lip_consts = heat::lip_threshold_constants(cfg.X, 200000, cfg.seed + 5);
    return ctx;
}

// Least-squares affine fit of F over {x + rho z} (Euclidean objective).
AffineMap least_squares_affine(const GridField& F, const Vec& x, double rho,
                               const std::vector<Vec>& zset) {
    const int n = F.dim_in();
    const int m = F.dim_out();
    const int cols = n + 1;
    Eigen::MatrixXd A(static_cast<Eigen::Index>(zset.size()), cols);
    Eigen::MatrixXd B(static_cast<Eigen::Index>(zset.size()), m);
    std::vector<double> buf(static_cast<std::size_t>(m));
    Vec y(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < zset.size(); ++i) {
        for (int d = 0; d < n; ++d) {
            y[static_cast<std::size_t>(d)] =
                x[static_cast<std::size_t>(d)] + rho * zset[i][static_cast<std::size_t>(d)];
            A(static_cast<Eigen::Index>(i), d + 1) = rho * zset[i][static_cast<std::size_t>(d)];
        }
        A(static_cast<Eigen::Index>(i), 0) = 1.0;
        F.eval(y, buf.data());
        for (int c = 0; c < m; ++c) B(static_cast<Eigen::Index>(i), c) = buf[static_cast<std::size_t>(c)];
    }
    const Eigen::MatrixXd sol = A.colPivHouseholderQr().solve(B);
    AffineMap map;
    map.base_point = x;
    map.value.resize(static_cast<std::size_t>(m));
    map.linear.assign(static_cast<std::size_t>(m), Vec(static_cast<std::size_t>(n)));
    for (int c = 0; c < m; ++c) {
        map.value[static_cast<std::size_t>(c)] = sol(0, c);
        for (int d = 0; d < n; ++d)
            map.linear[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] = sol(d + 1, c);
    }
    return map;
}

// avg_z ||F(x + rho z) - Lambda(x + rho z)||^q and the max over z.
void cell_errors(const GridField& F, const AffineMap& map, const Vec& x, double rho,
                 const std::vector<Vec>& zset, double q, double pout, double* lq_out,
                 double* linf_out) {
    const int n = F.dim_in();
    const int m = F.dim_out();
    std::vector<double> fy(static_cast<std::size_t>(m)), lyv(static_cast<std::size_t>(m)),
        diff(static_cast<std::size_t>(m));
    Vec y(static_cast<std::size_t>(n));
    double acc = 0.0, mx = 0.0;
    for (const Vec& z : zset) {
        for (int d = 0; d < n; ++d)
            y[static_cast<std::size_t>(d)] = x[static_cast<std::size_t>(d)] + rho * z[static_cast<std::size_t>(d)];
        F.eval(y, fy.data());
        map.eval(y, lyv.data());
        for (int c = 0; c < m; ++c)
            diff[static_cast<std::size_t>(c)] = fy[static_cast<std::size_t>(c)] - lyv[static_cast<std::size_t>(c)];
        const double nv = y_norm(diff.data(), m, pout);
        acc += std::pow(nv, q);
        mx = std::max(mx, nv);
    }
    *lq_out = acc / static_cast<double>(zset.size());
    *linf_out = mx;
}

}  // namespace

LocalReport local_functional(const GridField& f_on_ball, const DorroConfig& cfg, double r,
                             double T) {
    const int n = f_on_ball.dim_in();
    if (!(T <= 1.0 / (2.0 * n) + 1e-12))
        throw std::invalid_argument("local_functional: T must satisfy T <= 1/(2n)");
    if (!(r > 0.0) || r > T * T)
        throw std::invalid_argument("local_functional: need 0 < r <= T^2");

    LocalScanContext ctx = make_local_context(f_on_ball, cfg);
    LocalReport rep;
    rep.gamma = ctx.gamma;
    rep.T = T;
    rep.used_least_squares = cfg.least_squares_candidate;

    const ScaleGrid rho_grid(r, T, cfg.scale_grid.points);
    const auto rnodes = rho_grid.nodes();
    const auto rweights = rho_grid.weights();
    heat::Spectral spec(ctx.F);

    std::vector<double> terms(rnodes.size(), 0.0);
    std::vector<long long> counts(rnodes.size(), 0), violations(rnodes.size(), 0);
    parallel_for(rnodes.size(), cfg.threads, [&](std::size_t ri) {
        const double rho = rnodes[ri];
        const heat::Evolute ev = heat::heat_convolve(spec, ctx.F, ctx.gamma * rho * rho, true);
        double xacc = 0.0;
        long long cand = 0, viol = 0;
        for (const std::size_t p : ctx.xpoints) {
            const Vec x = ctx.F.point_coords(p);
            const AffineMap cand_map = heat::taylor_from_evolute(ev, x);
            const double lip = heat::affine_lip(cand_map, cfg.X, cfg.pout, 64, cfg.seed + 3);
            ++cand;
            const double threshold = heat::evolute_lip_threshold(
                cfg.X, x, n + 2.0, 64.0, ctx.lip_consts);
            if (ctx.gamma * rho * rho <= threshold && lip > 2.0) ++viol;
            double lq = 0.0, linf = 0.0;
            cell_errors(ctx.F, cand_map, x, rho, ctx.zset, cfg.q, cfg.pout, &lq, &linf);
            double inner = lq;  // min-accumulator over candidates
            if (cfg.least_squares_candidate) {
                const AffineMap ls = least_squares_affine(ctx.F, x, rho, ctx.zset);
                if (heat::affine_lip(ls, cfg.X, cfg.pout, 64, cfg.seed + 4) <= 2.0) {
                    double lq2 = 0.0, linf2 = 0.0;
                    cell_errors(ctx.F, ls, x, rho, ctx.zset, cfg.q, cfg.pout, &lq2, &linf2);
                    inner = std::min(inner, lq2);
                }
            }
            xacc += inner / std::pow(rho, cfg.q);
        }
        terms[ri] = rweights[ri] * xacc / static_cast<double>(ctx.xpoints.size());
        counts[ri] = cand;
        violations[ri] = viol;
    });

    const double logspan = std::log(T / r);
    rep.value = pairwise_sum(terms) / logspan;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        rep.candidates += counts[i];
        rep.lip_violations += violations[i];
    }
    const double K = K_constant(cfg.q, n, cfg.X, 1.0, 1.0, 200000, cfg.seed);
    rep.bound = std::pow(9.0 * K * n, cfg.q) / std::abs(std::log(r));
    rep.ratio = rep.bound > 0 ? rep.value / rep.bound : 0.0;
    return rep;
}

ApproximationResult affine_search(const GridField& f_on_ball, double eps, double q,
                                  const DorroConfig& cfg) {
    if (!(eps > 0.0) || eps > 0.5)
        throw std::invalid_argument("affine_search: eps must lie in (0, 1/2]");
    const int n = f_on_ball.dim_in();
    LocalScanContext ctx = make_local_context(f_on_ball, cfg);
    const double T = local_scale_T(q, n, cfg.X, 200000, cfg.seed);
    const double h = ctx.F.spacing();
    const double rho_floor = 4.0 * h;

    ApproximationResult best;
    best.linf_error = std::numeric_limits<double>::infinity();
    double c_up = 0.0;

    heat::Spectral spec(ctx.F);
    const int steps = cfg.scale_grid.points;
    const double rho_lo = std::max(rho_floor, 1e-9);
    for (int k = 0; k < steps; ++k) {
        const double rho = T * std::pow(rho_lo / T, static_cast<double>(k) / (steps - 1));
        const heat::Evolute ev = heat::heat_convolve(spec, ctx.F, ctx.gamma * rho * rho, true);
        for (const std::size_t p : ctx.xpoints) {
            const Vec x = ctx.F.point_coords(p);
            const AffineMap cand = heat::taylor_from_evolute(ev, x);
            double lq_pow = 0.0, linf = 0.0;
            cell_errors(ctx.F, cand, x, rho, ctx.zset, q, cfg.pout, &lq_pow, &linf);
            const double lq = std::pow(lq_pow, 1.0 / q) / rho;
            const double li = linf / rho;
            if (lq > 1e-12)
                c_up = std::max(c_up, li / std::pow(lq, q / (n + q)));
            const double lip = heat::affine_lip(cand, cfg.X, cfg.pout, 64, cfg.seed + 3);
            if (li < best.linf_error && lip <= 2.0) {
                best.x = x;
                best.rho = rho;
                best.map = cand;
                best.lq_error = lq;
                best.linf_error = li;
                best.lip_of_map = lip;
            }
            if (li <= eps && lip <= 2.0) {
                best.x = x;
                best.rho = rho;
                best.map = cand;
                best.lq_error = lq;
                best.linf_error = li;
                best.lip_of_map = lip;
                best.hit = true;
                best.upgrade_constant = c_up;
                return best;
            }
        }
    }
    // The scan bottomed out at the rho >= 4h resolution floor without a hit.
    best.unresolved_scale = true;
    best.upgrade_constant = c_up;
    return best;
}

}  // namespace heatlab::dorro
