#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "heatlab/spaces.hpp"

namespace heatlab::fields {

using spaces::NormedSpace;
using spaces::Vec;

// A vector-valued function R^n -> R^m sampled on a regular cubic grid with
// node spacing h = (b-a)/(res-1). Values are stored point-major (component
// index fastest), axis 0 slowest. Compactly supported inside the box; points
// outside evaluate to zero.
class GridField {
  public:
    GridField() = default;
    GridField(int dim_in, int dim_out, double box_a, double box_b, int res);

    int dim_in() const { return n_; }
    int dim_out() const { return m_; }
    double box_a() const { return a_; }
    double box_b() const { return b_; }
    int res() const { return res_; }
    double spacing() const { return h_; }
    std::size_t num_points() const { return npoints_; }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    double value(std::size_t point, int comp) const {
        return values_[point * static_cast<std::size_t>(m_) + static_cast<std::size_t>(comp)];
    }
    double& value(std::size_t point, int comp) {
        return values_[point * static_cast<std::size_t>(m_) + static_cast<std::size_t>(comp)];
    }

    // Grid geometry.
    Vec point_coords(std::size_t point) const;
    std::size_t point_index(const std::vector<int>& multi) const;
    void point_multi(std::size_t point, std::vector<int>& multi) const;

    // Multilinear interpolation; zero outside the box.
    void eval(const Vec& x, double* out) const;
    double eval_scalar(const Vec& x, int comp = 0) const;

    // Fills from a callable x -> value vector.
    void fill(const std::function<void(const Vec&, double*)>& f);

    // True when the boundary layer of width `layer` grid cells is exactly
    // zero on every side.
    bool has_compact_support(int layer) const;

    // Point-set support mask (any component nonzero).
    std::vector<std::uint8_t> support_mask() const;

    // Discrete L_q norm (sum h^n ||f(x)||_{l_pout}^q)^{1/q}; pout = 2 gives
    // the Euclidean target norm.
    double lq_norm(double q, double pout = 2.0) const;

  private:
    int n_ = 0;
    int m_ = 0;
    double a_ = 0.0;
    double b_ = 0.0;
    int res_ = 0;
    double h_ = 0.0;
    std::size_t npoints_ = 0;
    std::vector<double> values_;
};

enum class TestFunctionKind {
    GaussianBump,     // exp(-|x-c|^2 / (2 w^2)) with a smooth compact cutoff
    SmoothedCone,     // phi(||x||_X) for a mollified 1-Lipschitz profile
    RandomBandlimited,  // windowed random Fourier modes, seeded
    CoordinateAffine  // (c + A x) inside a plateau, windowed to zero outside
};

struct TestFunctionSpec {
    TestFunctionKind kind = TestFunctionKind::GaussianBump;
    int dim_out = 1;

    // GaussianBump
    Vec center;          // default 0
    double width = 1.0;  // Gaussian width
    double cutoff_radius = 0.0;  // 0 = auto (fits inside the padding layer)

    // SmoothedCone
    NormedSpace cone_space;  // defaults to l2 of the field dimension
    double cone_scale = 1.0;  // f = cone_scale * phi(||x||_X / cone_scale)
    double mollify = 0.0;     // smoothing scale; 0 = auto (2h)

    // RandomBandlimited
    std::uint64_t seed = 1;
    double k_min = 0.5;
    double k_max = 4.0;
    int modes = 24;

    // CoordinateAffine
    Vec affine_value;            // c (dim_out)
    std::vector<Vec> affine_a;   // A rows, one per output component
    double plateau_radius = 1.0;  // window is identically 1 for |x|_inf <= this
};

// Builds the field on [box_a, box_b]^n at the given resolution. Throws if the
// requested support would touch the boundary layer (the diagnostic names the
// box that would be required).
GridField make_field(const TestFunctionSpec& spec, int dim_in, double box_a, double box_b,
                     int res);

// Discrete Lipschitz constant: max over axis- and diagonal-neighbor pairs of
// ||f(x)-f(y)||_{l_pout} / ||x-y||_X. A lower bound for the true constant.
double lipschitz_constant(const GridField& f, const NormedSpace& X, double pout = 2.0);

// h^n * #support points.
double support_volume(const GridField& f);

// Shifts the field by an exact number of grid cells (zero-fill).
GridField shift_cells(const GridField& f, const std::vector<int>& cells);

// Flat binary layout (magic, n, m, res, box, little-endian doubles row-major)
// plus a JSON sidecar <path>.json.
void save_field(const GridField& f, const std::string& path);
GridField load_field(const std::string& path);

}  // namespace heatlab::fields
