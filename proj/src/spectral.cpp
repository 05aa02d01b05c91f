#include "heatlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include "heatlab/numeric.hpp"
#include "heatlab/quadrature.hpp"

namespace heatlab::spectral {

namespace {

// Cached Gauss-Jacobi rules keyed by (lambda, size).
const QuadratureRule& jacobi_rule(double lambda, int size) {
    static std::map<std::pair<double, int>, QuadratureRule> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto key = std::make_pair(lambda, size);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, gauss_jacobi_symmetric(size, lambda)).first;
    return it->second;
}

int rule_size_for(double s, int refine) {
    int base;
    if (s <= 30.0)
        base = 48;
    else if (s <= 80.0)
        base = 96;
    else if (s <= 160.0)
        base = 192;
    else
        base = 320;
    return refine > 0 ? base * 2 : base;
}

// u-integral of the squared residual against the (1-u^2)^lambda weight.
// heat = true uses E = e^{-gamma s^2}, else the Poisson factor e^{-gamma s}.
double residual_u_integral(double s, double gamma, double lambda, bool heat, int refine) {
    const double E = heat ? std::exp(-gamma * s * s) : std::exp(-gamma * s);
    const QuadratureRule& rule = jacobi_rule(lambda, rule_size_for(s, refine));
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double u = rule.nodes[i];
        const double su = s * u;
        const double re = std::cos(su) - E;
        const double im = std::sin(su) - su * E;
        acc += rule.weights[i] * (re * re + im * im);
    }
    return acc;
}

// W_0 = int (1-u^2)^lambda du and W_2 = int u^2 (1-u^2)^lambda du.
double weight_mass(double lambda) {
    return std::sqrt(M_PI) * std::exp(std::lgamma(lambda + 1.0) - std::lgamma(lambda + 1.5));
}

double weight_second_moment(double lambda) {
    return 0.5 * std::sqrt(M_PI) * std::exp(std::lgamma(lambda + 1.0) - std::lgamma(lambda + 2.5));
}

// Head integral int_0^1 residual_u(s) ds/s^3 in v = log s coordinates, where
// the integrand residual(e^v) e^{-2v} is smooth (the small-gamma and
// large-gamma layers both have unit width in v) and decays like gamma^2 e^{2v}
// toward -inf.
double head_integral(double gamma, double lambda, bool heat_factor, int refine) {
    const double W0 = weight_mass(lambda);
    const double scale_est = W0 * (1.0 + gamma * gamma);
    double s_lo = std::sqrt(2e-15 * scale_est / (gamma * gamma * W0));
    s_lo = std::min(0.01, std::max(s_lo, 1e-12));
    auto integrand = [&](double v) {
        const double s = std::exp(v);
        return residual_u_integral(s, gamma, lambda, heat_factor, refine) * std::exp(-2.0 * v);
    };
    const double width = refine > 0 ? 0.12 : 0.25;
    const QuadratureRule unit = gauss_jacobi_symmetric(15, 0.0);
    std::vector<double> parts;
    double v = std::log(s_lo);
    while (v < 0.0) {
        const double hi = std::min(0.0, v + width);
        const double mid = 0.5 * (v + hi), half = 0.5 * (hi - v);
        double panel = 0.0;
        for (std::size_t i = 0; i < unit.nodes.size(); ++i)
            panel += unit.weights[i] * integrand(mid + half * unit.nodes[i]);
        parts.push_back(panel * half);
        v = hi;
    }
    return pairwise_sum(parts);
}

// The full double integral int_0^inf residual_u(s) ds/s^3 for the heat factor.
double heat_double_integral(int n, double gamma, int refine) {
    const double lambda = 0.5 * (n - 1);
    const double head = head_integral(gamma, lambda, true, refine);

    // Middle: v = log s up to the point where the Gaussian factor is dead.
    const double s_cut = std::max(8.0, std::sqrt(51.0 / gamma));
    const double vmax = std::log(s_cut);
    std::vector<double> parts;
    const QuadratureRule unit = gauss_jacobi_symmetric(15, 0.0);
    double v = 0.0;
    while (v < vmax) {
        const double s_right = std::exp(std::min(vmax, v + 0.25));
        double width = std::min(0.25, 4.0 / s_right);
        if (refine > 0) width *= 0.5;
        const double hi = std::min(vmax, v + width);
        const double mid = 0.5 * (v + hi), half = 0.5 * (hi - v);
        double panel = 0.0;
        for (std::size_t i = 0; i < unit.nodes.size(); ++i) {
            const double vv = mid + half * unit.nodes[i];
            const double s = std::exp(vv);
            panel += unit.weights[i] *
                     residual_u_integral(s, gamma, lambda, true, refine) * std::exp(-2.0 * vv);
        }
        parts.push_back(panel * half);
        v = hi;
    }
    const double middle = pairwise_sum(parts);

    // Tail: the residual is within e^{-gamma s_cut^2} of the constant W_0.
    const double tail = weight_mass(lambda) / (2.0 * s_cut * s_cut);
    return head + middle + tail;
}

}  // namespace

double k_prefactor(int n) {
    // n |B^{n-1}| / |B^n| = n Gamma(n/2+1) / (sqrt(pi) Gamma((n+1)/2)).
    return n * std::exp(std::lgamma(0.5 * n + 1.0) - std::lgamma(0.5 * (n + 1))) / std::sqrt(M_PI);
}

KReport k_constant(int n, double gamma) {
    if (n < 1) throw std::invalid_argument("k_constant: n must be positive");
    if (!(gamma > 0.0))
        throw std::invalid_argument("k_constant: gamma must be positive (the integral diverges)");
    KReport rep;
    rep.n = n;
    rep.gamma = gamma;
    const double coarse = heat_double_integral(n, gamma, 0);
    const double fine = heat_double_integral(n, gamma, 1);
    rep.k_value = k_prefactor(n) * fine;
    rep.quadrature_error = k_prefactor(n) * std::abs(fine - coarse);
    rep.bound_rhs = k_bound_rhs(n, gamma);
    rep.ratio = rep.k_value / rep.bound_rhs;
    return rep;
}

double k_bound_rhs(int n, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("k_bound_rhs: gamma must be positive");
    const double gn = gamma * n;
    auto integrand = [gn](double v) {
        if (v <= 0.0) return 0.0;
        return v * v * std::exp(-v * v) * std::log(2.0 + (v * v + gn) / (v * std::sqrt(gn)));
    };
    return gn + adaptive_simpson(integrand, 0.0, 9.0, 1e-12);
}

double k_constant_bessel_oracle(int n, double gamma) {
    const double lambda = 0.5 * (n - 1);
    const double nu = 0.5 * n;
    const double W0 = weight_mass(lambda);
    const double W2 = weight_second_moment(lambda);
    const double A = std::sqrt(M_PI) * std::exp(std::lgamma(lambda + 1.0)) * std::pow(2.0, nu);

    // Closed-form u-integral: G(s) = W0 - 2 E [C + s Shat] + E^2 (W0 + s^2 W2)
    // with C = A s^{-nu} J_nu(s), Shat = A s^{-nu} J_{nu+1}(s).
    auto G = [&](double s) {
        const double E = std::exp(-gamma * s * s);
        const double spow = std::pow(s, -nu);
        const double C = A * spow * std::cyl_bessel_j(nu, s);
        const double Sh = A * spow * std::cyl_bessel_j(nu + 1.0, s);
        return W0 - 2.0 * E * (C + s * Sh) + E * E * (W0 + s * s * W2);
    };

    // Head via the residual form (the closed form cancels catastrophically at
    // small s) with an all-Simpson quadrature independent of the primary
    // Gauss-Jacobi/panel path; Bessel form beyond s = 1.
    auto residual_simpson = [&](double s) {
        const double E = std::exp(-gamma * s * s);
        return adaptive_simpson(
            [&](double u) {
                const double su = s * u;
                const double re = std::cos(su) - E;
                const double im = std::sin(su) - su * E;
                return (re * re + im * im) * std::pow(1.0 - u * u, lambda);
            },
            -1.0, 1.0, 1e-13, 44);
    };
    const double head = adaptive_simpson(
        [&](double v) {
            const double s = std::exp(v);
            return residual_simpson(s) * std::exp(-2.0 * v);
        },
        std::log(1e-7 / (1.0 + gamma)), 0.0, 1e-12, 44);
    const double s_cut = std::max(8.0, std::sqrt(51.0 / gamma));
    auto tail_integrand = [&](double v) {
        const double s = std::exp(v);
        return G(s) * std::exp(-2.0 * v);
    };
    // Panels in log s sized to the Bessel oscillation.
    double v = 0.0;
    const double vmax = std::log(s_cut);
    std::vector<double> parts;
    const QuadratureRule unit = gauss_jacobi_symmetric(15, 0.0);
    while (v < vmax) {
        const double s_right = std::exp(std::min(vmax, v + 0.125));
        const double width = std::min(0.125, 2.0 / s_right);
        const double hi = std::min(vmax, v + width);
        const double mid = 0.5 * (v + hi), half = 0.5 * (hi - v);
        double panel = 0.0;
        for (std::size_t i = 0; i < unit.nodes.size(); ++i)
            panel += unit.weights[i] * tail_integrand(mid + half * unit.nodes[i]);
        parts.push_back(panel * half);
        v = hi;
    }
    const double middle = pairwise_sum(parts);
    const double tail = W0 / (2.0 * s_cut * s_cut);
    return k_prefactor(n) * (head + middle + tail);
}

HeatIdentityReport verify_heat_identity(const GridField& f, double gamma,
                                        const dorro::DorroConfig& cfg) {
    const int n = f.dim_in();
    dorro::DorroConfig c = cfg;
    c.q = 2.0;
    c.pout = 2.0;
    c.gamma = gamma;
    if (c.X.dim() != n || c.X.kind() != spaces::NormKind::Lp || c.X.p() != 2.0 ||
        !c.X.identity_scale())
        c.X = spaces::NormedSpace::lp(n, 2.0);

    HeatIdentityReport rep;
    const lps::FunctionalReport direct = dorro::carleson_functional(f, c);
    rep.lhs = direct.value;
    const KReport k = k_constant(n, gamma);
    rep.k_value = k.k_value;
    heat::Spectral spec(f);
    rep.rhs = std::sqrt(k.k_value / n) * spec.gradient_l2();
    rep.rel_gap = rep.rhs > 0 ? std::abs(rep.lhs - rep.rhs) / rep.rhs : 0.0;
    return rep;
}

PoissonDivergenceReport poisson_divergence_scan(int n, double gamma,
                                                const std::vector<double>& cutoffs) {
    if (!(gamma > 0.0))
        throw std::invalid_argument("poisson_divergence_scan: gamma must be positive");
    const double lambda = 0.5 * (n - 1);
    PoissonDivergenceReport rep;

    auto truncated = [&](double eps, bool heat_factor) {
        // In v = log s the integrand residual_u(e^v) e^{-2v} is smooth and
        // tends to the constant gamma^2 W_0 (Poisson case) as v -> -inf.
        auto integrand = [&](double v) {
            const double s = std::exp(v);
            return residual_u_integral(s, gamma, lambda, heat_factor, 1) * std::exp(-2.0 * v);
        };
        return adaptive_simpson(integrand, std::log(eps), 0.0, 1e-11);
    };

    for (double eps : cutoffs) {
        rep.rows.push_back({eps, truncated(eps, false)});
        rep.heat_rows.push_back({eps, truncated(eps, true)});
    }

    // Fit a + b log(1/eps) over the three smallest cutoffs.
    std::vector<PoissonDivergenceRow> sorted = rep.rows;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.epsilon < b.epsilon; });
    const std::size_t kfit = std::min<std::size_t>(3, sorted.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < kfit; ++i) {
        const double x = std::log(1.0 / sorted[i].epsilon);
        const double y = sorted[i].value;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double kf = static_cast<double>(kfit);
    const double denom = kf * sxx - sx * sx;
    rep.slope = denom != 0.0 ? (kf * sxy - sx * sy) / denom : 0.0;
    const double intercept = (sy - rep.slope * sx) / kf;
    double ss = 0.0, range = 0.0;
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 0; i < kfit; ++i) {
        const double x = std::log(1.0 / sorted[i].epsilon);
        const double fit = intercept + rep.slope * x;
        ss += (fit - sorted[i].value) * (fit - sorted[i].value);
        lo = std::min(lo, sorted[i].value);
        hi = std::max(hi, sorted[i].value);
    }
    range = hi - lo;
    rep.fit_residual = range > 0 ? std::sqrt(ss / kf) / range : 0.0;
    rep.predicted_slope = gamma * gamma * weight_mass(lambda);
    return rep;
}

}  // namespace heatlab::spectral
