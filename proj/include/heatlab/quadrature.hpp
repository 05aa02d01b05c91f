#pragma once

#include <cmath>
#include <functional>
#include <vector>

namespace heatlab {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    double apply(const std::function<double(double)>& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
        return s;
    }
};

// Nodes and weights for the Gegenbauer weight (1-u^2)^lambda on [-1,1]
// (lambda = 0 recovers Gauss-Legendre), by Golub-Welsch on the symmetric
// tridiagonal recurrence matrix.
QuadratureRule gauss_jacobi_symmetric(int npoints, double lambda);

// Gauss-Legendre rule mapped to [a, b].
QuadratureRule gauss_legendre(int npoints, double a, double b);

// Adaptive Simpson with absolute/relative tolerance. min_depth forces a few
// rounds of subdivision before the error estimate may stop the recursion
// (guards against periodic integrands aliasing on the sample points).
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol, int max_depth = 40, int min_depth = 5);

// Integral of f over [a, b] by composite Gauss-Legendre with panel doubling
// until two refinements agree to tol (relative); writes the last disagreement
// into *err_estimate when non-null.
double panel_integrate(const std::function<double(double)>& f, double a, double b,
                       double tol, double* err_estimate = nullptr);

}  // namespace heatlab
