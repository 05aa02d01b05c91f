#include "heatlab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "heatlab/numeric.hpp"
#include "heatlab/rng.hpp"

namespace heatlab::transport {

double DiscreteMeasure::total() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

void DiscreteMeasure::validate() const {
    if (points.size() != weights.size())
        throw std::invalid_argument("DiscreteMeasure: points/weights size mismatch");
    for (double w : weights)
        if (w < 0.0) throw std::invalid_argument("DiscreteMeasure: negative weight");
}

double w1_quantile_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const NormedSpace& X) {
    if (X.dim() != 1) throw std::invalid_argument("w1_quantile_1d: requires n = 1");
    const double unit = X.norm(Vec{1.0});
    struct Atom {
        double pos, w;
    };
    std::vector<Atom> atoms;
    atoms.reserve(mu.points.size() + nu.points.size());
    for (std::size_t i = 0; i < mu.points.size(); ++i) atoms.push_back({mu.points[i][0], mu.weights[i]});
    for (std::size_t i = 0; i < nu.points.size(); ++i) atoms.push_back({nu.points[i][0], -nu.weights[i]});
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.pos < b.pos; });
    double cum = 0.0, cost = 0.0;
    for (std::size_t k = 0; k + 1 < atoms.size(); ++k) {
        cum += atoms[k].w;
        cost += std::abs(cum) * (atoms[k + 1].pos - atoms[k].pos);
    }
    return unit * cost;
}

W1Result w1_flow(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const NormedSpace& X) {
    mu.validate();
    nu.validate();
    const double tm = mu.total(), tn = nu.total();
    if (std::abs(tm - tn) > 1e-9 * std::max(1.0, std::max(tm, tn)))
        throw std::invalid_argument("w1_flow: unbalanced masses");
    const int ns = static_cast<int>(mu.points.size());
    const int nt = static_cast<int>(nu.points.size());
    std::vector<double> cost(static_cast<std::size_t>(ns) * static_cast<std::size_t>(nt));
    Vec diff(static_cast<std::size_t>(X.dim()));
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < nt; ++j) {
            for (int d = 0; d < X.dim(); ++d)
                diff[static_cast<std::size_t>(d)] = mu.points[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] -
                                                    nu.points[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)];
            cost[static_cast<std::size_t>(i) * static_cast<std::size_t>(nt) + static_cast<std::size_t>(j)] =
                X.norm(diff);
        }
    // Exactly balance the masses for the solver.
    std::vector<double> supply = mu.weights, demand = nu.weights;
    if (!demand.empty()) {
        double s = 0.0, d = 0.0;
        for (double v : supply) s += v;
        for (double v : demand) d += v;
        demand.back() += s - d;
        if (demand.back() < 0.0) demand.back() = 0.0;
    }
    const TransportationSimplex::Solution sol = TransportationSimplex::solve(supply, demand, cost);
    W1Result res;
    res.value = sol.cost;
    res.plan.cost = sol.cost;
    for (const auto& f : sol.flows) res.plan.flows.push_back({f.source, f.sink, f.mass});
    return res;
}

W1Result w1_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const NormedSpace& X) {
    if (X.dim() == 1) {
        W1Result res = w1_flow(mu, nu, X);
        res.value = w1_quantile_1d(mu, nu, X);  // primary path; flow is the cross-check
        return res;
    }
    return w1_flow(mu, nu, X);
}

BallQuadrature ball_quadrature(const GridField& f, const NormedSpace& X) {
    const int n = f.dim_in();
    const double h = f.spacing();
    BallQuadrature quad;
    quad.second_moment.assign(static_cast<std::size_t>(n), 0.0);

    const double cellvol = std::pow(h, n);
    std::vector<int> multi(static_cast<std::size_t>(n));
    Vec corner(static_cast<std::size_t>(n));
    for (std::size_t p = 0; p < f.num_points(); ++p) {
        const Vec x = f.point_coords(p);
        if (n == 1) {
            const double c = 1.0 / X.norm(Vec{1.0});
            const double lo = std::max(x[0] - 0.5 * h, -c);
            const double hi = std::min(x[0] + 0.5 * h, c);
            if (hi <= lo) continue;
            const double w = (hi - lo);
            quad.points.push_back(Vec{0.5 * (lo + hi)});
            quad.weights.push_back(w);
            continue;
        }
        // Classify by the cell corners.
        int inside = 0;
        const int corners = 1 << n;
        for (int cidx = 0; cidx < corners; ++cidx) {
            for (int d = 0; d < n; ++d)
                corner[static_cast<std::size_t>(d)] =
                    x[static_cast<std::size_t>(d)] + (((cidx >> d) & 1) ? 0.5 : -0.5) * h;
            if (X.norm(corner) <= 1.0) ++inside;
        }
        if (inside == corners) {
            quad.points.push_back(x);
            quad.weights.push_back(cellvol);
            continue;
        }
        if (inside == 0) continue;
        // Partial cell: subsample a 4^n midpoint lattice.
        const int sub = 4;
        int subcount = 1;
        for (int d = 0; d < n; ++d) subcount *= sub;
        int kept = 0;
        Vec centroid(static_cast<std::size_t>(n), 0.0);
        Vec y(static_cast<std::size_t>(n));
        for (int sidx = 0; sidx < subcount; ++sidx) {
            int rem = sidx;
            for (int d = 0; d < n; ++d) {
                const int k = rem % sub;
                rem /= sub;
                y[static_cast<std::size_t>(d)] =
                    x[static_cast<std::size_t>(d)] + ((k + 0.5) / sub - 0.5) * h;
            }
            if (X.norm(y) <= 1.0) {
                ++kept;
                for (int d = 0; d < n; ++d) centroid[static_cast<std::size_t>(d)] += y[static_cast<std::size_t>(d)];
            }
        }
        if (kept == 0) continue;
        for (int d = 0; d < n; ++d) centroid[static_cast<std::size_t>(d)] /= kept;
        quad.points.push_back(centroid);
        quad.weights.push_back(cellvol * kept / subcount);
    }

    for (std::size_t i = 0; i < quad.points.size(); ++i) {
        quad.volume += quad.weights[i];
        for (int d = 0; d < n; ++d)
            quad.second_moment[static_cast<std::size_t>(d)] +=
                quad.weights[i] * quad.points[i][static_cast<std::size_t>(d)] *
                quad.points[i][static_cast<std::size_t>(d)];
    }
    return quad;
}

AffineMap proj_operator(const GridField& f, const NormedSpace& X_iso, double L_X) {
    const int n = f.dim_in();
    const int m = f.dim_out();
    BallQuadrature quad = ball_quadrature(f, X_iso);
    if (std::abs(quad.volume - 1.0) > 0.05)
        throw std::invalid_argument(
            "proj_operator: the space does not carry the unit-volume normalization (|B_X| = " +
            std::to_string(quad.volume) + ")");
    (void)L_X;  // reported moments are taken from the same discrete quadrature

    AffineMap map;
    map.base_point.assign(static_cast<std::size_t>(n), 0.0);
    map.value.assign(static_cast<std::size_t>(m), 0.0);
    map.linear.assign(static_cast<std::size_t>(m), Vec(static_cast<std::size_t>(n), 0.0));

    std::vector<double> buf(static_cast<std::size_t>(m));
    std::vector<double> mean(static_cast<std::size_t>(m), 0.0);
    std::vector<double> first(static_cast<std::size_t>(n) * static_cast<std::size_t>(m), 0.0);
    for (std::size_t i = 0; i < quad.points.size(); ++i) {
        f.eval(quad.points[i], buf.data());
        const double w = quad.weights[i];
        for (int c = 0; c < m; ++c) {
            mean[static_cast<std::size_t>(c)] += w * buf[static_cast<std::size_t>(c)];
            for (int d = 0; d < n; ++d)
                first[static_cast<std::size_t>(d * m + c)] +=
                    w * quad.points[i][static_cast<std::size_t>(d)] * buf[static_cast<std::size_t>(c)];
        }
    }
    for (int c = 0; c < m; ++c) {
        map.value[static_cast<std::size_t>(c)] = mean[static_cast<std::size_t>(c)] / quad.volume;
        for (int d = 0; d < n; ++d)
            map.linear[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] =
                first[static_cast<std::size_t>(d * m + c)] /
                quad.second_moment[static_cast<std::size_t>(d)];
    }
    return map;
}

HalfBallMeasures half_ball_measures(const NormedSpace& X, const Vec& x, int atoms_per_measure) {
    const int n = X.dim();
    double xnorm2 = 0.0;
    for (double v : x) xnorm2 += v * v;
    if (xnorm2 == 0.0) throw std::invalid_argument("half_ball_measures: x must be nonzero");

    const double R = spaces::circumradius(X, 64, 0x51de).value;
    // Pick the cell count so roughly atoms_per_measure cells land per half.
    const double vol = spaces::ball_volume(X, 200000, 0x0b).value;
    const double box_vol = std::pow(2.0 * R, n);
    int res = static_cast<int>(std::ceil(
        std::pow(2.2 * atoms_per_measure * box_vol / vol, 1.0 / n)));
    if (res % 2 != 0) ++res;  // keep the lattice symmetric about the origin
    const double h = 2.0 * R / res;

    HalfBallMeasures out;
    std::vector<int> multi(static_cast<std::size_t>(n), 0);
    Vec y(static_cast<std::size_t>(n));
    const double cellvol = std::pow(h, n);
    for (;;) {
        for (int d = 0; d < n; ++d)
            y[static_cast<std::size_t>(d)] = -R + (multi[static_cast<std::size_t>(d)] + 0.5) * h;
        if (X.norm(y) <= 1.0) {
            double xy = 0.0;
            for (int d = 0; d < n; ++d) xy += x[static_cast<std::size_t>(d)] * y[static_cast<std::size_t>(d)];
            if (xy > 0.0) {
                out.nu_plus.points.push_back(y);
                out.nu_plus.weights.push_back(xy * cellvol);
            } else if (xy < 0.0) {
                out.nu_minus.points.push_back(y);
                out.nu_minus.weights.push_back(-xy * cellvol);
            }
        }
        int d = n - 1;
        for (; d >= 0; --d) {
            if (++multi[static_cast<std::size_t>(d)] < res) break;
            multi[static_cast<std::size_t>(d)] = 0;
        }
        if (d < 0) break;
    }
    out.mu_plus = out.nu_plus;
    out.mu_minus = out.nu_minus;
    const double tp = out.mu_plus.total(), tm = out.mu_minus.total();
    for (auto& w : out.mu_plus.weights) w /= tp;
    for (auto& w : out.mu_minus.weights) w /= tm;
    return out;
}

ProjNormReport proj_norm_estimate(const NormedSpace& X_iso, double L_X, int sphere_samples,
                                  int atoms, std::uint64_t seed, int threads) {
    const int n = X_iso.dim();
    if (n > 3) throw std::invalid_argument("proj_norm_estimate: flow-solver scale requires n <= 3");

    // Directions on the X-unit sphere.
    std::vector<Vec> dirs;
    if (n == 1) {
        const double c = 1.0 / X_iso.norm(Vec{1.0});
        dirs.push_back(Vec{c});
        dirs.push_back(Vec{-c});
    } else {
        for (auto& sigma : spaces::sample_sphere(X_iso, sphere_samples, seed)) {
            const double nx = X_iso.norm(sigma);
            for (auto& v : sigma) v /= nx;
            dirs.push_back(std::move(sigma));
        }
    }

    auto w1_pair = [&](const Vec& x, int natoms, double* w1_mu_out) {
        const HalfBallMeasures hb = half_ball_measures(X_iso, x, natoms);
        const W1Result nu = w1_distance(hb.nu_plus, hb.nu_minus, X_iso);
        if (w1_mu_out) {
            const W1Result mu = w1_distance(hb.mu_plus, hb.mu_minus, X_iso);
            *w1_mu_out = mu.value;
        }
        return nu.value;
    };

    // Refinement gate on the first direction: doubling the atom count must
    // move W1 by no more than 2%. Atom counts stay within the dense-solver
    // scale (2e3 per side).
    constexpr int kAtomCap = 2000;
    int use_atoms = std::min(atoms, kAtomCap);
    {
        const Vec& probe = dirs.front();
        double prev = w1_pair(probe, use_atoms, nullptr);
        while (use_atoms * 2 <= kAtomCap) {
            const double next = w1_pair(probe, use_atoms * 2, nullptr);
            if (std::abs(next - prev) <= 0.02 * std::abs(next)) break;
            use_atoms *= 2;
            prev = next;
        }
    }

    ProjNormReport rep;
    rep.atoms_used = use_atoms;
    rep.rows.resize(dirs.size());
    parallel_for(dirs.size(), threads, [&](std::size_t i) {
        ProjNormRow row;
        row.x = dirs[i];
        double w1mu = 0.0;
        row.w1_nu = w1_pair(dirs[i], use_atoms, &w1mu);
        row.w1_mu = w1mu;
        row.duality = row.w1_nu / (L_X * L_X);
        double x2 = 0.0;
        for (double v : dirs[i]) x2 += v * v;
        const double xnx = X_iso.norm(dirs[i]);
        row.symmetry_ratio = std::sqrt(x2) / (L_X * xnx) * row.w1_mu;
        rep.rows[i] = std::move(row);
    });
    for (const auto& row : rep.rows) rep.proj_norm = std::max(rep.proj_norm, row.duality);

    // Local ascent on the empirical objective around the best direction.
    if (n > 1) {
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < rep.rows.size(); ++i)
            if (rep.rows[i].duality >= rep.rows[best_i].duality) best_i = i;
        Vec cur = rep.rows[best_i].x;
        double best = rep.proj_norm;
        Rng rng = Rng(seed).split(0xacce);
        double radius = 0.3;
        for (int round = 0; round < 8; ++round) {
            bool improved = false;
            for (int trial = 0; trial < 6; ++trial) {
                Vec cand = cur;
                for (auto& v : cand) v += radius * rng.normal();
                const double nx = X_iso.norm(cand);
                if (nx == 0.0) continue;
                for (auto& v : cand) v /= nx;
                const double val = w1_pair(cand, use_atoms, nullptr) / (L_X * L_X);
                if (val > best) {
                    best = val;
                    cur = cand;
                    improved = true;
                }
            }
            if (!improved) radius *= 0.5;
        }
        rep.proj_norm = best;
    }
    return rep;
}

}  // namespace heatlab::transport
