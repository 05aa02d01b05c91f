#include "heatlab/fields.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "heatlab/rng.hpp"

namespace heatlab::fields {

namespace {

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

// Seventh-order smoothstep: 0 at u<=0, 1 at u>=1, C^3 joins (keeps the
// spectral tail of windowed fields below the grid Nyquist floor).
double smoothstep(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    const double u2 = u * u;
    return u2 * u2 * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)));
}

// Smooth radial cutoff: 1 for r <= r0, 0 for r >= r1.
double cutoff(double r, double r0, double r1) {
    if (r <= r0) return 1.0;
    if (r >= r1) return 0.0;
    return smoothstep((r1 - r) / (r1 - r0));
}

}  // namespace

GridField::GridField(int dim_in, int dim_out, double box_a, double box_b, int res)
    : n_(dim_in), m_(dim_out), a_(box_a), b_(box_b), res_(res) {
    if (dim_in < 1 || dim_in > 4) throw std::invalid_argument("GridField: dim_in out of range");
    if (dim_out < 1) throw std::invalid_argument("GridField: dim_out must be positive");
    if (!(box_b > box_a)) throw std::invalid_argument("GridField: empty box");
    if (!power_of_two(res)) throw std::invalid_argument("GridField: res must be a power of two");
    h_ = (b_ - a_) / (res_ - 1);
    npoints_ = 1;
    for (int d = 0; d < n_; ++d) npoints_ *= static_cast<std::size_t>(res_);
    values_.assign(npoints_ * static_cast<std::size_t>(m_), 0.0);
}

Vec GridField::point_coords(std::size_t point) const {
    Vec x(static_cast<std::size_t>(n_));
    for (int d = n_ - 1; d >= 0; --d) {
        const std::size_t i = point % static_cast<std::size_t>(res_);
        point /= static_cast<std::size_t>(res_);
        x[static_cast<std::size_t>(d)] = a_ + h_ * static_cast<double>(i);
    }
    return x;
}

std::size_t GridField::point_index(const std::vector<int>& multi) const {
    std::size_t idx = 0;
    for (int d = 0; d < n_; ++d) idx = idx * static_cast<std::size_t>(res_) + static_cast<std::size_t>(multi[static_cast<std::size_t>(d)]);
    return idx;
}

void GridField::point_multi(std::size_t point, std::vector<int>& multi) const {
    multi.resize(static_cast<std::size_t>(n_));
    for (int d = n_ - 1; d >= 0; --d) {
        multi[static_cast<std::size_t>(d)] = static_cast<int>(point % static_cast<std::size_t>(res_));
        point /= static_cast<std::size_t>(res_);
    }
}

void GridField::eval(const Vec& x, double* out) const {
    for (int c = 0; c < m_; ++c) out[c] = 0.0;
    int base[4];
    double frac[4];
    for (int d = 0; d < n_; ++d) {
        const double u = (x[static_cast<std::size_t>(d)] - a_) / h_;
        if (u < 0.0 || u > static_cast<double>(res_ - 1)) return;  // compact support
        int i = static_cast<int>(std::floor(u));
        if (i >= res_ - 1) i = res_ - 2;
        base[d] = i;
        frac[d] = u - static_cast<double>(i);
    }
    const int corners = 1 << n_;
    for (int corner = 0; corner < corners; ++corner) {
        double w = 1.0;
        std::size_t idx = 0;
        for (int d = 0; d < n_; ++d) {
            const int bit = (corner >> d) & 1;
            w *= bit ? frac[d] : 1.0 - frac[d];
            idx = idx * static_cast<std::size_t>(res_) + static_cast<std::size_t>(base[d] + bit);
        }
        if (w == 0.0) continue;
        const double* v = &values_[idx * static_cast<std::size_t>(m_)];
        for (int c = 0; c < m_; ++c) out[c] += w * v[c];
    }
}

double GridField::eval_scalar(const Vec& x, int comp) const {
    std::vector<double> buf(static_cast<std::size_t>(m_));
    eval(x, buf.data());
    return buf[static_cast<std::size_t>(comp)];
}

void GridField::fill(const std::function<void(const Vec&, double*)>& f) {
    std::vector<double> buf(static_cast<std::size_t>(m_));
    for (std::size_t p = 0; p < npoints_; ++p) {
        const Vec x = point_coords(p);
        f(x, buf.data());
        for (int c = 0; c < m_; ++c) value(p, c) = buf[static_cast<std::size_t>(c)];
    }
}

bool GridField::has_compact_support(int layer) const {
    std::vector<int> multi;
    for (std::size_t p = 0; p < npoints_; ++p) {
        bool boundary = false;
        std::size_t rem = p;
        for (int d = n_ - 1; d >= 0; --d) {
            const int i = static_cast<int>(rem % static_cast<std::size_t>(res_));
            rem /= static_cast<std::size_t>(res_);
            if (i < layer || i >= res_ - layer) {
                boundary = true;
                break;
            }
        }
        if (!boundary) continue;
        for (int c = 0; c < m_; ++c)
            if (value(p, c) != 0.0) return false;
    }
    return true;
}

std::vector<std::uint8_t> GridField::support_mask() const {
    std::vector<std::uint8_t> mask(npoints_, 0);
    for (std::size_t p = 0; p < npoints_; ++p)
        for (int c = 0; c < m_; ++c)
            if (value(p, c) != 0.0) {
                mask[p] = 1;
                break;
            }
    return mask;
}

double GridField::lq_norm(double q, double pout) const {
    double acc = 0.0;
    for (std::size_t p = 0; p < npoints_; ++p) {
        double ynorm;
        if (m_ == 1) {
            ynorm = std::abs(value(p, 0));
        } else if (pout == 2.0) {
            double s = 0.0;
            for (int c = 0; c < m_; ++c) s += value(p, c) * value(p, c);
            ynorm = std::sqrt(s);
        } else if (std::isinf(pout)) {
            ynorm = 0.0;
            for (int c = 0; c < m_; ++c) ynorm = std::max(ynorm, std::abs(value(p, c)));
        } else {
            double s = 0.0;
            for (int c = 0; c < m_; ++c) s += std::pow(std::abs(value(p, c)), pout);
            ynorm = std::pow(s, 1.0 / pout);
        }
        acc += std::pow(ynorm, q);
    }
    double cell = 1.0;
    for (int d = 0; d < n_; ++d) cell *= h_;
    return std::pow(acc * cell, 1.0 / q);
}

GridField make_field(const TestFunctionSpec& spec, int dim_in, double box_a, double box_b,
                     int res) {
    if (res < 32) throw std::invalid_argument("make_field: res must be at least 32");
    GridField f(dim_in, spec.dim_out, box_a, box_b, res);
    const int pad_layer = res / 8;
    const double half = 0.5 * (box_b - box_a);
    const double pad_width = pad_layer * f.spacing();
    const double max_radius = half - pad_width;
    const Vec zero(static_cast<std::size_t>(dim_in), 0.0);

    switch (spec.kind) {
        case TestFunctionKind::GaussianBump: {
            const Vec c = spec.center.empty() ? zero : spec.center;
            double r1 = spec.cutoff_radius > 0 ? spec.cutoff_radius : max_radius;
            double cmax = 0.0;
            for (double v : c) cmax = std::max(cmax, std::abs(v));
            if (cmax + r1 > half - pad_width + 1e-12) {
                std::ostringstream os;
                os << "make_field: gaussian bump support touches the boundary layer; "
                   << "required box half-width >= " << (cmax + r1) / (1.0 - static_cast<double>(pad_layer) / (res / 2)) << ", got " << half;
                throw std::invalid_argument(os.str());
            }
            const double r0 = 0.7 * r1;
            f.fill([&](const Vec& x, double* out) {
                double r2 = 0.0;
                for (std::size_t d = 0; d < x.size(); ++d) {
                    const double dd = x[d] - c[d];
                    r2 += dd * dd;
                }
                const double r = std::sqrt(r2);
                const double v = std::exp(-r2 / (2.0 * spec.width * spec.width)) * cutoff(r, r0, r1);
                for (int comp = 0; comp < spec.dim_out; ++comp) out[comp] = v;
            });
            break;
        }
        case TestFunctionKind::SmoothedCone: {
            NormedSpace X = spec.cone_space.dim() == dim_in ? spec.cone_space
                                                            : NormedSpace::lp(dim_in, 2.0);
            const double s = spec.cone_scale;
            const double eps = spec.mollify > 0 ? spec.mollify : 2.0 * f.spacing();
            // Profile phi(u) = mollified max(0, s - u): 1-Lipschitz in u, with the
            // kinks at u = 0 and u = s smoothed on scale eps.
            auto profile = [&](double u) {
                // Convolution of max(0, s-u) with a triangular kernel of half-width eps.
                if (u <= -eps) return s - u;
                if (u >= s + eps) return 0.0;
                auto base = [&](double v) { return std::max(0.0, s - std::max(v, 0.0)); };
                // 5-point Simpson over [u-eps, u+eps] of base against the hat weight.
                double acc = 0.0, wacc = 0.0;
                const int k = 16;
                for (int i = -k; i <= k; ++i) {
                    const double t = static_cast<double>(i) / k;
                    const double w = 1.0 - std::abs(t);
                    acc += w * base(u + t * eps);
                    wacc += w;
                }
                return acc / wacc;
            };
            const double support_r = X.closed_form_circumradius().value_or(1.0) * s + eps;
            if (support_r > max_radius + 1e-12) {
                std::ostringstream os;
                os << "make_field: cone support (euclid radius " << support_r
                   << ") touches the boundary layer; box half-width " << half
                   << " leaves usable radius " << max_radius;
                throw std::invalid_argument(os.str());
            }
            f.fill([&](const Vec& x, double* out) {
                const double v = profile(X.norm(x));
                for (int comp = 0; comp < spec.dim_out; ++comp) out[comp] = v;
            });
            break;
        }
        case TestFunctionKind::RandomBandlimited: {
            Rng rng = Rng(spec.seed).split(0xf1e1d);
            const double r1 = max_radius;
            const double r0 = 0.6 * r1;
            struct Mode {
                Vec k;
                double amp, phase;
            };
            std::vector<std::vector<Mode>> comp_modes(static_cast<std::size_t>(spec.dim_out));
            for (auto& modes : comp_modes) {
                for (int j = 0; j < spec.modes; ++j) {
                    Mode m;
                    m.k.resize(static_cast<std::size_t>(dim_in));
                    double kn = 0.0;
                    for (auto& kv : m.k) {
                        kv = rng.normal();
                        kn += kv * kv;
                    }
                    kn = std::sqrt(kn);
                    const double target = spec.k_min + (spec.k_max - spec.k_min) * rng.uniform();
                    for (auto& kv : m.k) kv *= target / (kn > 0 ? kn : 1.0);
                    m.amp = rng.uniform(-1.0, 1.0) / spec.modes;
                    m.phase = rng.uniform(0.0, 2.0 * M_PI);
                    modes.push_back(std::move(m));
                }
            }
            f.fill([&](const Vec& x, double* out) {
                double r2 = 0.0;
                for (double v : x) r2 += v * v;
                const double w = cutoff(std::sqrt(r2), r0, r1);
                for (int compi = 0; compi < spec.dim_out; ++compi) {
                    double v = 0.0;
                    for (const auto& m : comp_modes[static_cast<std::size_t>(compi)]) {
                        double kx = 0.0;
                        for (std::size_t d = 0; d < x.size(); ++d) kx += m.k[d] * x[d];
                        v += m.amp * std::cos(kx + m.phase);
                    }
                    out[compi] = w * v;
                }
            });
            break;
        }
        case TestFunctionKind::CoordinateAffine: {
            if (static_cast<int>(spec.affine_a.size()) != spec.dim_out)
                throw std::invalid_argument("make_field: affine rows must match dim_out");
            const double r1 = max_radius;
            const double rp = spec.plateau_radius;
            if (rp >= r1)
                throw std::invalid_argument(
                    "make_field: affine plateau touches the boundary layer; shrink plateau_radius");
            f.fill([&](const Vec& x, double* out) {
                double rinf = 0.0;
                for (double v : x) rinf = std::max(rinf, std::abs(v));
                const double w = cutoff(rinf, rp, r1);
                for (int compi = 0; compi < spec.dim_out; ++compi) {
                    double v = spec.affine_value.empty() ? 0.0 : spec.affine_value[static_cast<std::size_t>(compi)];
                    for (std::size_t d = 0; d < x.size(); ++d)
                        v += spec.affine_a[static_cast<std::size_t>(compi)][d] * x[d];
                    out[compi] = w * v;
                }
            });
            break;
        }
    }
    return f;
}

double lipschitz_constant(const GridField& f, const NormedSpace& X, double pout) {
    const int n = f.dim_in();
    const int m = f.dim_out();
    const int res = f.res();
    const double h = f.spacing();

    // Offsets: positive axis steps plus distinct diagonal directions.
    std::vector<std::vector<int>> offsets;
    std::vector<int> off(static_cast<std::size_t>(n), 0);
    std::function<void(int)> gen = [&](int d) {
        if (d == n) {
            bool nonzero = false;
            for (int v : off) nonzero |= v != 0;
            if (!nonzero) return;
            // Keep one of each +-pair: first nonzero entry positive.
            for (int v : off) {
                if (v > 0) break;
                if (v < 0) return;
            }
            offsets.push_back(off);
            return;
        }
        for (int v : {-1, 0, 1}) {
            off[static_cast<std::size_t>(d)] = v;
            gen(d + 1);
        }
        off[static_cast<std::size_t>(d)] = 0;
    };
    gen(0);

    std::vector<Vec> dx;
    std::vector<double> dist;
    for (const auto& o : offsets) {
        Vec v(static_cast<std::size_t>(n));
        for (int d = 0; d < n; ++d) v[static_cast<std::size_t>(d)] = h * o[static_cast<std::size_t>(d)];
        dist.push_back(X.norm(v));
        dx.push_back(std::move(v));
    }

    double best = 0.0;
    std::vector<int> multi(static_cast<std::size_t>(n));
    for (std::size_t p = 0; p < f.num_points(); ++p) {
        f.point_multi(p, multi);
        for (std::size_t oi = 0; oi < offsets.size(); ++oi) {
            bool ok = true;
            std::size_t q = 0;
            for (int d = 0; d < n; ++d) {
                const int j = multi[static_cast<std::size_t>(d)] + offsets[oi][static_cast<std::size_t>(d)];
                if (j < 0 || j >= res) {
                    ok = false;
                    break;
                }
                q = q * static_cast<std::size_t>(res) + static_cast<std::size_t>(j);
            }
            if (!ok) continue;
            double ynorm;
            if (m == 1) {
                ynorm = std::abs(f.value(q, 0) - f.value(p, 0));
            } else if (pout == 2.0) {
                double s = 0.0;
                for (int c = 0; c < m; ++c) {
                    const double dv = f.value(q, c) - f.value(p, c);
                    s += dv * dv;
                }
                ynorm = std::sqrt(s);
            } else if (std::isinf(pout)) {
                ynorm = 0.0;
                for (int c = 0; c < m; ++c)
                    ynorm = std::max(ynorm, std::abs(f.value(q, c) - f.value(p, c)));
            } else {
                double s = 0.0;
                for (int c = 0; c < m; ++c)
                    s += std::pow(std::abs(f.value(q, c) - f.value(p, c)), pout);
                ynorm = std::pow(s, 1.0 / pout);
            }
            best = std::max(best, ynorm / dist[oi]);
        }
    }
    return best;
}

double support_volume(const GridField& f) {
    const auto mask = f.support_mask();
    std::size_t count = 0;
    for (auto v : mask) count += v;
    double cell = 1.0;
    for (int d = 0; d < f.dim_in(); ++d) cell *= f.spacing();
    return cell * static_cast<double>(count);
}

GridField shift_cells(const GridField& f, const std::vector<int>& cells) {
    GridField g(f.dim_in(), f.dim_out(), f.box_a(), f.box_b(), f.res());
    const int n = f.dim_in();
    const int res = f.res();
    std::vector<int> multi(static_cast<std::size_t>(n));
    for (std::size_t p = 0; p < f.num_points(); ++p) {
        f.point_multi(p, multi);
        bool ok = true;
        std::size_t q = 0;
        for (int d = 0; d < n; ++d) {
            const int j = multi[static_cast<std::size_t>(d)] - cells[static_cast<std::size_t>(d)];
            if (j < 0 || j >= res) {
                ok = false;
                break;
            }
            q = q * static_cast<std::size_t>(res) + static_cast<std::size_t>(j);
        }
        if (!ok) continue;
        for (int c = 0; c < f.dim_out(); ++c) g.value(p, c) = f.value(q, c);
    }
    return g;
}

void save_field(const GridField& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_field: cannot open " + path);
    const char magic[8] = {'G', 'F', 'L', 'D', '0', '0', '0', '1'};
    os.write(magic, 8);
    const std::int64_t n = f.dim_in(), m = f.dim_out(), res = f.res();
    const double a = f.box_a(), b = f.box_b();
    os.write(reinterpret_cast<const char*>(&n), 8);
    os.write(reinterpret_cast<const char*>(&m), 8);
    os.write(reinterpret_cast<const char*>(&res), 8);
    os.write(reinterpret_cast<const char*>(&a), 8);
    os.write(reinterpret_cast<const char*>(&b), 8);
    os.write(reinterpret_cast<const char*>(f.values().data()),
             static_cast<std::streamsize>(f.values().size() * sizeof(double)));
    nlohmann::json sidecar = {
        {"dim_in", f.dim_in()}, {"dim_out", f.dim_out()}, {"res", f.res()},
        {"box", {f.box_a(), f.box_b()}}, {"layout", "row-major, component-interleaved, f64le"}};
    std::ofstream js(path + ".json");
    js << sidecar.dump(2) << "\n";
}

GridField load_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_field: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (std::memcmp(magic, "GFLD0001", 8) != 0)
        throw std::runtime_error("load_field: bad magic in " + path);
    std::int64_t n, m, res;
    double a, b;
    is.read(reinterpret_cast<char*>(&n), 8);
    is.read(reinterpret_cast<char*>(&m), 8);
    is.read(reinterpret_cast<char*>(&res), 8);
    is.read(reinterpret_cast<char*>(&a), 8);
    is.read(reinterpret_cast<char*>(&b), 8);
    GridField f(static_cast<int>(n), static_cast<int>(m), a, b, static_cast<int>(res));
    is.read(reinterpret_cast<char*>(f.values().data()),
            static_cast<std::streamsize>(f.values().size() * sizeof(double)));
    if (!is) throw std::runtime_error("load_field: truncated payload in " + path);
    return f;
}

}  // namespace heatlab::fields
