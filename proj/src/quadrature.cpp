#include "heatlab/quadrature.hpp"

#include <Eigen/Dense>

#include <stdexcept>

#include "heatlab/numeric.hpp"

namespace heatlab {

QuadratureRule gauss_jacobi_symmetric(int npoints, double lambda) {
    if (npoints < 1) throw std::invalid_argument("gauss_jacobi_symmetric: npoints < 1");
    // Recurrence for w(u) = (1-u^2)^lambda: diagonal terms vanish by symmetry,
    // off-diagonal b_k^2 = k(k+2*lambda) / ((2k+2*lambda+1)(2k+2*lambda-1)).
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(npoints);
    Eigen::VectorXd sub(npoints - 1 > 0 ? npoints - 1 : 0);
    for (int k = 1; k < npoints; ++k) {
        const double kk = static_cast<double>(k);
        const double b2 = kk * (kk + 2.0 * lambda) /
                          ((2.0 * kk + 2.0 * lambda + 1.0) * (2.0 * kk + 2.0 * lambda - 1.0));
        sub(k - 1) = std::sqrt(b2);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    const double mu0 = std::sqrt(M_PI) * std::exp(std::lgamma(lambda + 1.0) - std::lgamma(lambda + 1.5));

    QuadratureRule rule;
    rule.nodes.resize(static_cast<std::size_t>(npoints));
    rule.weights.resize(static_cast<std::size_t>(npoints));
    for (int i = 0; i < npoints; ++i) {
        rule.nodes[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
        const double v0 = solver.eigenvectors()(0, i);
        rule.weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0;
    }
    return rule;
}

QuadratureRule gauss_legendre(int npoints, double a, double b) {
    QuadratureRule base = gauss_jacobi_symmetric(npoints, 0.0);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    for (std::size_t i = 0; i < base.nodes.size(); ++i) {
        base.nodes[i] = mid + half * base.nodes[i];
        base.weights[i] *= half;
    }
    return base;
}

namespace {

double simpson(double a, double fa, double b, double fb, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double fa, double b,
                            double fb, double m, double fm, double whole, double tol, int depth,
                            int force) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, fa, m, fm, flm);
    const double right = simpson(m, fm, b, fb, frm);
    const double delta = left + right - whole;
    const double floor = 3e-16 * std::abs(left + right);  // roundoff-limited
    if (depth <= 0 || (force <= 0 && std::abs(delta) <= 15.0 * std::max(tol, floor)))
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, force - 1) +
           adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, force - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth, int min_depth) {
    if (a == b) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fm = f(m);
    const double whole = simpson(a, fa, b, fb, fm);
    return adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, max_depth, min_depth);
}

double panel_integrate(const std::function<double(double)>& f, double a, double b, double tol,
                       double* err_estimate) {
    const QuadratureRule unit = gauss_jacobi_symmetric(15, 0.0);
    auto evaluate = [&](int panels) {
        std::vector<double> parts(static_cast<std::size_t>(panels));
        const double width = (b - a) / panels;
        for (int p = 0; p < panels; ++p) {
            const double lo = a + p * width;
            const double mid = lo + 0.5 * width;
            double s = 0.0;
            for (std::size_t i = 0; i < unit.nodes.size(); ++i)
                s += unit.weights[i] * f(mid + 0.5 * width * unit.nodes[i]);
            parts[static_cast<std::size_t>(p)] = s * 0.5 * width;
        }
        return pairwise_sum(parts);
    };
    int panels = 4;
    double prev = evaluate(panels);
    for (int iter = 0; iter < 12; ++iter) {
        panels *= 2;
        const double cur = evaluate(panels);
        const double diff = std::abs(cur - prev);
        if (diff <= tol * std::max(1.0, std::abs(cur))) {
            if (err_estimate) *err_estimate = diff;
            return cur;
        }
        prev = cur;
    }
    if (err_estimate) *err_estimate = std::abs(prev);
    return prev;
}

}  // namespace heatlab
