#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "heatlab/fields.hpp"
#include "heatlab/heat.hpp"
#include "heatlab/lps.hpp"

using namespace heatlab;
using namespace heatlab::fields;
using spaces::NormedSpace;
using spaces::Vec;

namespace {

GridField bump_1d(int res = 256, double box = 8.0) {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::GaussianBump;
    spec.width = 1.0;
    return make_field(spec, 1, -box, box, res);
}

}  // namespace

TEST_CASE("gaussian bump: unit peak at the center, compact support") {
    const GridField f = bump_1d();
    double mx = 0.0;
    for (std::size_t p = 0; p < f.num_points(); ++p) mx = std::max(mx, f.value(p, 0));
    // The peak sits between nodes on an even-resolution grid; the grid max
    // approaches 1 from below as h -> 0.
    CHECK(mx <= 1.0);
    CHECK(mx > 1.0 - f.spacing() * f.spacing());
    CHECK(f.has_compact_support(f.res() / 8));
}

TEST_CASE("coordinate-affine plateau has the exact constant gradient") {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::CoordinateAffine;
    spec.dim_out = 1;
    spec.affine_value = {0.25};
    spec.affine_a = {{0.7, -0.3}};
    spec.plateau_radius = 1.5;
    const GridField f = make_field(spec, 2, -6.0, 6.0, 64);
    const double h = f.spacing();
    const Vec x0{0.1, -0.2};
    const double fx = f.eval_scalar(x0);
    CHECK(fx == doctest::Approx(0.25 + 0.7 * 0.1 + 0.3 * 0.2).epsilon(1e-12));
    const double d0 = (f.eval_scalar({0.1 + h, -0.2}) - fx) / h;
    const double d1 = (f.eval_scalar({0.1, -0.2 + h}) - fx) / h;
    CHECK(d0 == doctest::Approx(0.7).epsilon(1e-10));
    CHECK(d1 == doctest::Approx(-0.3).epsilon(1e-10));
}

TEST_CASE("random-bandlimited fields are deterministic in the seed") {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::RandomBandlimited;
    spec.seed = 3;
    const GridField a = make_field(spec, 1, -8.0, 8.0, 64);
    const GridField b = make_field(spec, 1, -8.0, 8.0, 64);
    CHECK(a.values() == b.values());
    spec.seed = 4;
    const GridField c = make_field(spec, 1, -8.0, 8.0, 64);
    CHECK(a.values() != c.values());
}

TEST_CASE("make_field rejects supports touching the boundary layer") {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::GaussianBump;
    spec.cutoff_radius = 7.9;  // box [-8, 8] leaves no padding
    CHECK_THROWS_AS(make_field(spec, 1, -8.0, 8.0, 64), std::invalid_argument);
}

TEST_CASE("lipschitz constant of an affine plateau and the zero field") {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::CoordinateAffine;
    spec.affine_value = {0.0};
    spec.affine_a = {{1.2}};
    spec.plateau_radius = 2.0;
    const GridField f = make_field(spec, 1, -8.0, 8.0, 512);
    const double lip = lipschitz_constant(f, NormedSpace::lp(1, 2.0));
    CHECK(lip >= 1.2 - 1e-10);

    GridField zero(1, 1, -4.0, 4.0, 64);
    CHECK(lipschitz_constant(zero, NormedSpace::lp(1, 2.0)) == 0.0);
}

TEST_CASE("smoothed cone is 1-Lipschitz up to grid defect; refinement shrinks it") {
    for (double pnorm : {1.0, 2.0}) {
        const NormedSpace X = NormedSpace::lp(2, pnorm);
        TestFunctionSpec spec;
        spec.kind = TestFunctionKind::SmoothedCone;
        spec.cone_space = X;
        double defect_coarse = 0.0, defect_fine = 0.0;
        for (int res : {64, 128}) {
            const GridField f = make_field(spec, 2, -4.0, 4.0, res);
            const double lip = lipschitz_constant(f, X);
            CHECK(lip <= 1.0 + 12.0 * f.spacing());
            (res == 64 ? defect_coarse : defect_fine) = std::max(0.0, lip - 1.0);
        }
        if (defect_coarse > 1e-6) CHECK(defect_fine < defect_coarse);
    }
}

TEST_CASE("support_volume examples") {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::GaussianBump;
    spec.cutoff_radius = 1.0;
    spec.width = 0.4;
    const GridField f = make_field(spec, 1, -8.0, 8.0, 512);
    CHECK(support_volume(f) == doctest::Approx(2.0).epsilon(0.05));

    GridField zero(1, 1, -4.0, 4.0, 64);
    CHECK(support_volume(zero) == 0.0);

    // Indicator-like plateau of measure 4 in n = 2 (2x2 square window).
    TestFunctionSpec plat;
    plat.kind = TestFunctionKind::CoordinateAffine;
    plat.affine_value = {1.0};
    plat.affine_a = {{0.0, 0.0}};
    plat.plateau_radius = 1.0;
    const GridField g = make_field(plat, 2, -2.0, 2.0, 128);
    std::size_t plateau = 0;
    for (std::size_t p = 0; p < g.num_points(); ++p)
        if (g.value(p, 0) >= 1.0 - 1e-9) ++plateau;  // the exact-plateau region
    const double cell = g.spacing() * g.spacing();
    CHECK(static_cast<double>(plateau) * cell == doctest::Approx(4.0).epsilon(8.0 * g.spacing()));
}

TEST_CASE("lipschitz estimate is monotone under refinement") {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::RandomBandlimited;
    spec.seed = 5;
    double prev = 0.0;
    for (int res : {64, 128, 256}) {
        const GridField f = make_field(spec, 1, -8.0, 8.0, res);
        const double lip = lipschitz_constant(f, NormedSpace::lp(1, 2.0));
        CHECK(lip >= prev - 1e-12);
        prev = lip;
    }
}

TEST_CASE("shifting by exact cells leaves downstream functionals unchanged") {
    // The box margin is chosen so every evolute involved keeps its mass far
    // from the boundary; the restricted-grid norms are then shift invariant
    // down to roundoff.
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::GaussianBump;
    spec.width = 0.8;
    spec.cutoff_radius = 3.0;
    const GridField f = make_field(spec, 1, -16.0, 16.0, 256);
    const GridField g = shift_cells(f, {12});

    CHECK(f.lq_norm(2.0) == doctest::Approx(g.lq_norm(2.0)).epsilon(1e-13));
    CHECK(lipschitz_constant(f, NormedSpace::lp(1, 2.0)) ==
          doctest::Approx(lipschitz_constant(g, NormedSpace::lp(1, 2.0))).epsilon(1e-12));
    CHECK(support_volume(f) == doctest::Approx(support_volume(g)).epsilon(1e-12));

    const lps::ScaleGrid grid(1e-3, 1.0, 32);
    const double tf = lps::temporal_g(f, 2.0, grid).value;
    const double tg = lps::temporal_g(g, 2.0, grid).value;
    CHECK(std::abs(tf - tg) <= 1e-12 * std::max(1.0, std::abs(tf)));
}

TEST_CASE("binary field io round trip") {
    TestFunctionSpec spec;
    spec.kind = TestFunctionKind::RandomBandlimited;
    spec.seed = 9;
    spec.dim_out = 2;
    const GridField f = make_field(spec, 2, -4.0, 4.0, 32);
    const auto path = std::filesystem::temp_directory_path() / "heatlab_field_test.gfld";
    save_field(f, path.string());
    const GridField g = load_field(path.string());
    CHECK(g.dim_in() == f.dim_in());
    CHECK(g.dim_out() == f.dim_out());
    CHECK(g.res() == f.res());
    CHECK(g.box_a() == f.box_a());
    CHECK(g.values() == f.values());
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".json");
}
