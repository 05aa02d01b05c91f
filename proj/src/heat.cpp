#include "heatlab/heat.hpp"

#include <fftw3.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "heatlab/numeric.hpp"
#include "heatlab/quadrature.hpp"
#include "heatlab/rng.hpp"

namespace heatlab::heat {

namespace {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

void AffineMap::eval(const Vec& y, double* out) const {
    const int m = dim_out();
    const int n = dim_in();
    for (int c = 0; c < m; ++c) {
        double v = value[static_cast<std::size_t>(c)];
        for (int j = 0; j < n; ++j)
            v += linear[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] *
                 (y[static_cast<std::size_t>(j)] - base_point[static_cast<std::size_t>(j)]);
        out[c] = v;
    }
}

// --- Spectral ---------------------------------------------------------------

struct Spectral::Impl {
    int n = 0, m = 0, res = 0, pres = 0;
    double h = 0.0, a = 0.0, b = 0.0;
    std::size_t ptotal = 0;
    std::vector<std::vector<std::complex<double>>> spec;  // one per component
    std::vector<double> freqs;                            // per padded index
    fftw_plan backward = nullptr;

    ~Impl() {
        if (backward) {
            std::lock_guard<std::mutex> lock(fftw_planner_mutex());
            fftw_destroy_plan(backward);
        }
    }
};

Spectral::Spectral(const GridField& f) : impl_(std::make_unique<Impl>()) {
    Impl& im = *impl_;
    im.n = n_ = f.dim_in();
    im.m = m_ = f.dim_out();
    im.res = f.res();
    im.pres = pres_ = 2 * f.res();
    im.h = f.spacing();
    im.a = f.box_a();
    im.b = f.box_b();
    im.ptotal = 1;
    for (int d = 0; d < im.n; ++d) im.ptotal *= static_cast<std::size_t>(im.pres);

    im.freqs.resize(static_cast<std::size_t>(im.pres));
    const double dxi = 2.0 * M_PI / (im.pres * im.h);
    for (int k = 0; k < im.pres; ++k) {
        const int kk = k <= im.pres / 2 ? k : k - im.pres;
        im.freqs[static_cast<std::size_t>(k)] = dxi * kk;
    }

    // Pack each component into the padded array and transform in place.
    std::vector<int> dims(static_cast<std::size_t>(im.n), im.pres);
    im.spec.assign(static_cast<std::size_t>(im.m),
                   std::vector<std::complex<double>>(im.ptotal, {0.0, 0.0}));

    fftw_plan forward = nullptr;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        forward = fftw_plan_dft(
            im.n, dims.data(), reinterpret_cast<fftw_complex*>(im.spec[0].data()),
            reinterpret_cast<fftw_complex*>(im.spec[0].data()), FFTW_FORWARD, FFTW_ESTIMATE);
        im.backward = fftw_plan_dft(
            im.n, dims.data(), reinterpret_cast<fftw_complex*>(im.spec[0].data()),
            reinterpret_cast<fftw_complex*>(im.spec[0].data()), FFTW_BACKWARD, FFTW_ESTIMATE);
    }

    std::vector<int> multi(static_cast<std::size_t>(im.n));
    for (int c = 0; c < im.m; ++c) {
        auto& buf = im.spec[static_cast<std::size_t>(c)];
        std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
        for (std::size_t p = 0; p < f.num_points(); ++p) {
            std::size_t rem = p, pidx = 0;
            for (int d = im.n - 1; d >= 0; --d) {
                multi[static_cast<std::size_t>(d)] = static_cast<int>(rem % static_cast<std::size_t>(im.res));
                rem /= static_cast<std::size_t>(im.res);
            }
            for (int d = 0; d < im.n; ++d)
                pidx = pidx * static_cast<std::size_t>(im.pres) +
                       static_cast<std::size_t>(multi[static_cast<std::size_t>(d)]);
            buf[pidx] = f.value(p, c);
        }
        fftw_execute_dft(forward, reinterpret_cast<fftw_complex*>(buf.data()),
                         reinterpret_cast<fftw_complex*>(buf.data()));
    }
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(forward);
    }
}

Spectral::~Spectral() = default;

double Spectral::freq(int k) const { return impl_->freqs[static_cast<std::size_t>(k)]; }

namespace {

// Iterates padded-grid modes, calling fn(mode_index, xi2, xi_components).
template <typename Fn>
void for_each_mode(const Spectral::Impl& im, Fn&& fn) {
    const int n = im.n;
    const std::size_t total = im.ptotal;
    std::vector<int> multi(static_cast<std::size_t>(n), 0);
    Vec xi(static_cast<std::size_t>(n));
    for (std::size_t p = 0; p < total; ++p) {
        double xi2 = 0.0;
        for (int d = 0; d < n; ++d) {
            xi[static_cast<std::size_t>(d)] = im.freqs[static_cast<std::size_t>(multi[static_cast<std::size_t>(d)])];
            xi2 += xi[static_cast<std::size_t>(d)] * xi[static_cast<std::size_t>(d)];
        }
        fn(p, xi2, xi);
        for (int d = n - 1; d >= 0; --d) {
            if (++multi[static_cast<std::size_t>(d)] < im.pres) break;
            multi[static_cast<std::size_t>(d)] = 0;
        }
    }
}

GridField extract_original(const Spectral::Impl& im,
                           const std::vector<std::vector<std::complex<double>>>& padded,
                           int mout) {
    GridField g(im.n, mout, im.a, im.b, im.res);
    const double scale = 1.0 / static_cast<double>(im.ptotal);
    std::vector<int> multi(static_cast<std::size_t>(im.n));
    for (std::size_t p = 0; p < g.num_points(); ++p) {
        std::size_t rem = p, pidx = 0;
        for (int d = im.n - 1; d >= 0; --d) {
            multi[static_cast<std::size_t>(d)] = static_cast<int>(rem % static_cast<std::size_t>(im.res));
            rem /= static_cast<std::size_t>(im.res);
        }
        for (int d = 0; d < im.n; ++d)
            pidx = pidx * static_cast<std::size_t>(im.pres) +
                   static_cast<std::size_t>(multi[static_cast<std::size_t>(d)]);
        for (int c = 0; c < mout; ++c)
            g.value(p, c) = padded[static_cast<std::size_t>(c)][pidx].real() * scale;
    }
    return g;
}

}  // namespace

GridField Spectral::apply_radial(const std::function<double(double)>& g) const {
    const Impl& im = *impl_;
    std::vector<std::vector<std::complex<double>>> out(
        static_cast<std::size_t>(im.m), std::vector<std::complex<double>>(im.ptotal));
    for (int c = 0; c < im.m; ++c) {
        auto& buf = out[static_cast<std::size_t>(c)];
        const auto& src = im.spec[static_cast<std::size_t>(c)];
        for_each_mode(im, [&](std::size_t p, double xi2, const Vec&) { buf[p] = src[p] * g(xi2); });
        fftw_execute_dft(im.backward, reinterpret_cast<fftw_complex*>(buf.data()),
                         reinterpret_cast<fftw_complex*>(buf.data()));
    }
    return extract_original(im, out, im.m);
}

GridField Spectral::apply_directional(const Vec& z, const std::function<double(double)>& g) const {
    const Impl& im = *impl_;
    std::vector<std::vector<std::complex<double>>> out(
        static_cast<std::size_t>(im.m), std::vector<std::complex<double>>(im.ptotal));
    for (int c = 0; c < im.m; ++c) {
        auto& buf = out[static_cast<std::size_t>(c)];
        const auto& src = im.spec[static_cast<std::size_t>(c)];
        for_each_mode(im, [&](std::size_t p, double xi2, const Vec& xi) {
            double zxi = 0.0;
            for (int d = 0; d < im.n; ++d)
                zxi += z[static_cast<std::size_t>(d)] * xi[static_cast<std::size_t>(d)];
            buf[p] = src[p] * std::complex<double>(0.0, zxi * g(xi2));
        });
        fftw_execute_dft(im.backward, reinterpret_cast<fftw_complex*>(buf.data()),
                         reinterpret_cast<fftw_complex*>(buf.data()));
    }
    return extract_original(im, out, im.m);
}

GridField Spectral::apply_gradient(const std::function<double(double)>& g) const {
    const Impl& im = *impl_;
    std::vector<std::vector<std::complex<double>>> out(
        static_cast<std::size_t>(im.n * im.m), std::vector<std::complex<double>>(im.ptotal));
    for (int j = 0; j < im.n; ++j) {
        for (int c = 0; c < im.m; ++c) {
            auto& buf = out[static_cast<std::size_t>(j * im.m + c)];
            const auto& src = im.spec[static_cast<std::size_t>(c)];
            for_each_mode(im, [&](std::size_t p, double xi2, const Vec& xi) {
                buf[p] = src[p] * std::complex<double>(0.0, xi[static_cast<std::size_t>(j)] * g(xi2));
            });
            fftw_execute_dft(im.backward, reinterpret_cast<fftw_complex*>(buf.data()),
                             reinterpret_cast<fftw_complex*>(buf.data()));
        }
    }
    return extract_original(im, out, im.n * im.m);
}

GridField Spectral::apply_divergence(const std::function<double(double)>& g) const {
    const Impl& im = *impl_;
    if (im.m != im.n)
        throw std::invalid_argument("apply_divergence: field must have m = n components");
    std::vector<std::vector<std::complex<double>>> out(
        1, std::vector<std::complex<double>>(im.ptotal, {0.0, 0.0}));
    auto& buf = out[0];
    for (int j = 0; j < im.n; ++j) {
        const auto& src = im.spec[static_cast<std::size_t>(j)];
        for_each_mode(im, [&](std::size_t p, double xi2, const Vec& xi) {
            buf[p] += src[p] * std::complex<double>(0.0, xi[static_cast<std::size_t>(j)] * g(xi2));
        });
    }
    fftw_execute_dft(im.backward, reinterpret_cast<fftw_complex*>(buf.data()),
                     reinterpret_cast<fftw_complex*>(buf.data()));
    return extract_original(im, out, 1);
}

double Spectral::gradient_l2() const {
    const Impl& im = *impl_;
    // Parseval on the padded grid: sum_k |xi_k|^2 |fhat_k|^2 * (h^n / ptotal).
    double cell = 1.0;
    for (int d = 0; d < im.n; ++d) cell *= im.h;
    std::vector<double> acc(static_cast<std::size_t>(im.m), 0.0);
    for (int c = 0; c < im.m; ++c) {
        const auto& src = im.spec[static_cast<std::size_t>(c)];
        double s = 0.0;
        for_each_mode(im, [&](std::size_t p, double xi2, const Vec&) { s += xi2 * std::norm(src[p]); });
        acc[static_cast<std::size_t>(c)] = s;
    }
    double total = 0.0;
    for (double v : acc) total += v;
    return std::sqrt(total * cell / static_cast<double>(im.ptotal));
}

double Spectral::field_l2() const {
    const Impl& im = *impl_;
    double cell = 1.0;
    for (int d = 0; d < im.n; ++d) cell *= im.h;
    double total = 0.0;
    for (int c = 0; c < im.m; ++c) {
        const auto& src = im.spec[static_cast<std::size_t>(c)];
        double s = 0.0;
        for (std::size_t p = 0; p < im.ptotal; ++p) s += std::norm(src[p]);
        total += s;
    }
    return std::sqrt(total * cell / static_cast<double>(im.ptotal));
}

// --- semigroup operations ----------------------------------------------------

double heat_time_limit(const GridField& f) {
    const double w = (f.box_b() - f.box_a()) / 8.0;
    return w * w;
}

double poisson_time_limit(const GridField& f) { return (f.box_b() - f.box_a()) / 8.0; }

namespace {

void check_admissible(double t, double limit, const char* kindname) {
    if (t < 0.0) throw AdmissibilityError(std::string(kindname) + ": negative time");
    if (t > limit) {
        std::ostringstream os;
        os << kindname << ": t = " << t << " exceeds the admissible range [0, " << limit
           << "] for this box (kernel wraparound)";
        throw AdmissibilityError(os.str());
    }
}

}  // namespace

Evolute heat_convolve(const Spectral& spec, const GridField& f, double t, bool with_gradient) {
    check_admissible(t, heat_time_limit(f), "heat_convolve");
    Evolute e;
    e.t = t;
    e.kind = SemigroupKind::Heat;
    auto mult = [t](double xi2) { return std::exp(-t * xi2); };
    e.values = spec.apply_radial(mult);
    if (with_gradient) e.gradient = spec.apply_gradient(mult);
    return e;
}

Evolute heat_convolve(const GridField& f, double t, bool with_gradient) {
    Spectral spec(f);
    return heat_convolve(spec, f, t, with_gradient);
}

Evolute poisson_convolve(const GridField& f, double t, bool with_gradient) {
    check_admissible(t, poisson_time_limit(f), "poisson_convolve");
    Spectral spec(f);
    Evolute e;
    e.t = t;
    e.kind = SemigroupKind::Poisson;
    auto mult = [t](double xi2) { return std::exp(-t * std::sqrt(xi2)); };
    e.values = spec.apply_radial(mult);
    if (with_gradient) e.gradient = spec.apply_gradient(mult);
    return e;
}

GridField gradient(const GridField& f) {
    Spectral spec(f);
    return spec.apply_gradient([](double) { return 1.0; });
}

GridField fd_gradient(const GridField& f) {
    const int n = f.dim_in();
    const int m = f.dim_out();
    GridField g(n, n * m, f.box_a(), f.box_b(), f.res());
    const double inv2h = 1.0 / (2.0 * f.spacing());
    std::vector<int> multi(static_cast<std::size_t>(n));
    std::vector<double> vplus(static_cast<std::size_t>(m)), vminus(static_cast<std::size_t>(m));
    for (std::size_t p = 0; p < f.num_points(); ++p) {
        f.point_multi(p, multi);
        for (int d = 0; d < n; ++d) {
            std::fill(vplus.begin(), vplus.end(), 0.0);
            std::fill(vminus.begin(), vminus.end(), 0.0);
            auto neighbor = [&](int step, std::vector<double>& out) {
                std::vector<int> q = multi;
                q[static_cast<std::size_t>(d)] += step;
                if (q[static_cast<std::size_t>(d)] < 0 || q[static_cast<std::size_t>(d)] >= f.res()) return;
                const std::size_t idx = f.point_index(q);
                for (int c = 0; c < m; ++c) out[static_cast<std::size_t>(c)] = f.value(idx, c);
            };
            neighbor(+1, vplus);
            neighbor(-1, vminus);
            for (int c = 0; c < m; ++c)
                g.value(p, d * m + c) =
                    (vplus[static_cast<std::size_t>(c)] - vminus[static_cast<std::size_t>(c)]) * inv2h;
        }
    }
    return g;
}

void direct_heat_quadrature(const GridField& f, double t, const Vec& x, double* out) {
    const int n = f.dim_in();
    const int m = f.dim_out();
    if (!(t > 0.0)) {
        f.eval(x, out);
        return;
    }
    const double norm = std::pow(4.0 * M_PI * t, -0.5 * n);
    double cell = 1.0;
    for (int d = 0; d < n; ++d) cell *= f.spacing();
    for (int c = 0; c < m; ++c) out[c] = 0.0;
    for (std::size_t p = 0; p < f.num_points(); ++p) {
        const Vec y = f.point_coords(p);
        double r2 = 0.0;
        for (int d = 0; d < n; ++d) {
            const double dd = x[static_cast<std::size_t>(d)] - y[static_cast<std::size_t>(d)];
            r2 += dd * dd;
        }
        const double w = norm * std::exp(-r2 / (4.0 * t)) * cell;
        if (w == 0.0) continue;
        for (int c = 0; c < m; ++c) out[c] += w * f.value(p, c);
    }
}

AffineMap taylor_from_evolute(const Evolute& e, const Vec& x) {
    const int n = e.values.dim_in();
    const int m = e.values.dim_out();
    for (int d = 0; d < n; ++d) {
        const double xd = x[static_cast<std::size_t>(d)];
        if (xd < e.values.box_a() || xd > e.values.box_b())
            throw std::invalid_argument("taylor_from_evolute: x outside the box");
    }
    AffineMap map;
    map.base_point = x;
    map.value.resize(static_cast<std::size_t>(m));
    e.values.eval(x, map.value.data());
    std::vector<double> grad(static_cast<std::size_t>(n * m));
    e.gradient.eval(x, grad.data());
    map.linear.assign(static_cast<std::size_t>(m), Vec(static_cast<std::size_t>(n), 0.0));
    for (int j = 0; j < n; ++j)
        for (int c = 0; c < m; ++c)
            map.linear[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] =
                grad[static_cast<std::size_t>(j * m + c)];

    // Interpolation bias ~ (h^2/8) |d^2 E|, estimated from the gradient's own
    // one-sided differences around x.
    const double h = e.values.spacing();
    double curv = 0.0;
    std::vector<double> gplus(static_cast<std::size_t>(n * m)), gminus(static_cast<std::size_t>(n * m));
    for (int d = 0; d < n; ++d) {
        Vec xp = x, xm = x;
        xp[static_cast<std::size_t>(d)] = std::min(xp[static_cast<std::size_t>(d)] + h, e.values.box_b());
        xm[static_cast<std::size_t>(d)] = std::max(xm[static_cast<std::size_t>(d)] - h, e.values.box_a());
        e.gradient.eval(xp, gplus.data());
        e.gradient.eval(xm, gminus.data());
        for (int c = 0; c < m; ++c)
            curv = std::max(curv, std::abs(gplus[static_cast<std::size_t>(d * m + c)] -
                                           gminus[static_cast<std::size_t>(d * m + c)]) /
                                      (2.0 * h));
    }
    map.interp_bias = h * h / 8.0 * curv * n;
    return map;
}

AffineMap taylor_evolute(const GridField& f, const Vec& x, double t, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("taylor_evolute: gamma must be positive");
    const Evolute e = heat_convolve(f, gamma * t * t, true);
    return taylor_from_evolute(e, x);
}

double affine_lip(const AffineMap& map, const NormedSpace& X, double pout, int samples,
                  std::uint64_t seed) {
    const int n = map.dim_in();
    const int m = map.dim_out();
    if (m == 1) {
        if (auto dual = X.closed_form_dual_norm(map.linear[0])) return *dual;
    }
    if (X.kind() == spaces::NormKind::Lp && X.p() == 2.0 && X.identity_scale() && pout == 2.0) {
        Eigen::MatrixXd A(m, n);
        for (int c = 0; c < m; ++c)
            for (int j = 0; j < n; ++j)
                A(c, j) = map.linear[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
        return svd.singularValues()(0);
    }

    auto a_norm = [&](const Vec& z) {
        double s = 0.0;
        if (pout == 2.0) {
            for (int c = 0; c < m; ++c) {
                double v = 0.0;
                for (int j = 0; j < n; ++j)
                    v += map.linear[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] *
                         z[static_cast<std::size_t>(j)];
                s += v * v;
            }
            return std::sqrt(s);
        }
        double mx = 0.0;
        for (int c = 0; c < m; ++c) {
            double v = 0.0;
            for (int j = 0; j < n; ++j)
                v += map.linear[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] *
                     z[static_cast<std::size_t>(j)];
            if (std::isinf(pout))
                mx = std::max(mx, std::abs(v));
            else
                s += std::pow(std::abs(v), pout);
        }
        return std::isinf(pout) ? mx : std::pow(s, 1.0 / pout);
    };
    auto objective = [&](const Vec& sigma) {
        const double nx = X.norm(sigma);
        if (nx == 0.0) return 0.0;
        Vec z(sigma.size());
        for (std::size_t i = 0; i < sigma.size(); ++i) z[i] = sigma[i] / nx;
        return a_norm(z);
    };

    Rng rng = Rng(seed).split(0xa11);
    double best = 0.0;
    Vec best_sigma;
    for (int i = 0; i < std::max(samples, 8); ++i) {
        Vec sigma(static_cast<std::size_t>(n));
        double n2 = 0.0;
        for (auto& v : sigma) {
            v = rng.normal();
            n2 += v * v;
        }
        if (n2 == 0.0) continue;
        for (auto& v : sigma) v /= std::sqrt(n2);
        const double val = objective(sigma);
        if (val > best) {
            best = val;
            best_sigma = sigma;
        }
    }
    // Local ascent by shrinking random perturbations.
    if (!best_sigma.empty()) {
        double radius = 0.5;
        Vec cur = best_sigma;
        for (int round = 0; round < 60; ++round) {
            bool improved = false;
            for (int trial = 0; trial < 24; ++trial) {
                Vec cand = cur;
                double n2 = 0.0;
                for (auto& v : cand) {
                    v += radius * rng.normal();
                    n2 += v * v;
                }
                for (auto& v : cand) v /= std::sqrt(n2);
                const double val = objective(cand);
                if (val > best) {
                    best = val;
                    cur = cand;
                    improved = true;
                }
            }
            if (!improved) radius *= 0.5;
            if (radius < 1e-9) break;
        }
    }
    return best;
}

LipThresholdConstants lip_threshold_constants(const NormedSpace& X, long long count,
                                              std::uint64_t seed) {
    LipThresholdConstants c;
    c.M1 = spaces::invariant_M_p(X, 1.0, count, seed).value;
    c.b = spaces::invariant_b(X, 64, seed + 1).value;
    return c;
}

double evolute_lip_threshold(const NormedSpace& X, const Vec& x, double L, double C) {
    return evolute_lip_threshold(X, x, L, C, lip_threshold_constants(X, 200000, 0x71));
}

double evolute_lip_threshold(const NormedSpace& X, const Vec& x, double L, double C,
                             const LipThresholdConstants& consts) {
    const double nx = X.norm(x);
    if (!(nx < 1.0)) throw std::invalid_argument("evolute_lip_threshold: need ||x||_X < 1");
    if (!(L >= 1.0)) throw std::invalid_argument("evolute_lip_threshold: need L >= 1");
    const double n = static_cast<double>(X.dim());
    const double logL = std::log(L);
    const double denom = consts.M1 * std::sqrt(n) + consts.b * std::sqrt(std::max(0.0, logL));
    return (1.0 - nx) * (1.0 - nx) / (C * denom * denom);
}

KernelDerivativeL1 heat_time_derivative_l1(int n, double t) {
    if (n < 1) throw std::invalid_argument("heat_time_derivative_l1: n must be positive");
    if (!(t > 0.0)) throw std::invalid_argument("heat_time_derivative_l1: t must be positive");
    KernelDerivativeL1 res;
    res.closed_form = std::exp(std::log(2.0) - std::lgamma(0.5 * n) +
                               0.5 * n * (std::log(static_cast<double>(n)) - std::log(2.0) - 1.0));
    // t dh_t/dt = -(1/2)(n - |x|^2/(2t)) h_t; after u = r/sqrt(t) the radial
    // integral is t-free:
    //   ||t dh_t/dt||_1 = (1 / (2^n Gamma(n/2))) int_0^inf |n - u^2/2| e^{-u^2/4} u^{n-1} du.
    auto integrand = [n](double u) {
        return std::abs(n - 0.5 * u * u) * std::exp(-0.25 * u * u) *
               std::pow(u, static_cast<double>(n - 1));
    };
    const double ustar = std::sqrt(2.0 * n);
    const double umax = ustar + 42.0;
    // Tolerance scaled to the integral's own magnitude (known from the closed
    // form up to the prefactor below).
    const double tol =
        1e-12 * res.closed_form * std::exp(n * std::log(2.0) + std::lgamma(0.5 * n));
    const double integral = adaptive_simpson(integrand, 0.0, ustar, tol) +
                            adaptive_simpson(integrand, ustar, umax, tol);
    res.quadrature = integral * std::exp(-n * std::log(2.0) - std::lgamma(0.5 * n));
    return res;
}

}  // namespace heatlab::heat
