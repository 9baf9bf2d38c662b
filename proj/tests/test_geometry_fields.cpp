#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "cohsrc/errors.hpp"
#include "cohsrc/geometry_fields.hpp"
#include "test_support.hpp"

using namespace cohsrc;

namespace {

const PotentialGrid& fig4a_grid() {
  static const PotentialGrid grid = solve_laplace(build_geometry(GeometryConfig{}), ElectrodeVoltages{-1600.0, 200.0, 0.0});
  return grid;
}

bool has_key(const std::vector<Violation>& v, const std::string& key) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.key == key; });
}

}  // namespace

TEST(Geometry, DefaultsAreValid) {
  EXPECT_TRUE(geometry_violations(GeometryConfig{}).empty());
  const Geometry g = build_geometry(GeometryConfig{});
  EXPECT_GT(g.layout().nx(), 100u);
  EXPECT_LT(g.apex_node_x(), g.config().aperture1_x);
}

TEST(Geometry, RejectsUnorderedApertures) {
  GeometryConfig c;
  std::swap(c.aperture1_x, c.aperture2_x);
  EXPECT_TRUE(has_key(geometry_violations(c), "geometry_aperture2_x"));
  EXPECT_THROW(build_geometry(c), ValidationError);
}

TEST(Geometry, RejectsCoarseGrid) {
  GeometryConfig c;
  c.grid_spacing = c.aperture_hole_diameter / 5.0;
  EXPECT_TRUE(has_key(geometry_violations(c), "geometry_grid_spacing"));
}

TEST(Geometry, NegativeTipRadiusNamesTheKey) {
  GeometryConfig c;
  c.tip_radius = -1e-6;
  const auto v = geometry_violations(c);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].key, "geometry_tip_radius");
}

TEST(Laplace, ParallelPlatesGiveLinearRamp) {
  const double length = 10e-3;
  auto layout = fixtures::plates_layout(length, 200);
  const std::vector<double> volts{0.0, 0.0, 100.0};
  const PotentialGrid grid = solve_laplace(layout, volts, {1e-9 * 100.0, 400000, {}});
  double worst = 0.0;
  for (std::size_t j = 0; j < layout->nr(); ++j) {
    for (std::size_t i = 0; i < layout->nx(); ++i) {
      const double x = static_cast<double>(i) * layout->spacing();
      worst = std::max(worst, std::abs(grid.node(i, j) - 100.0 * x / length));
    }
  }
  EXPECT_LT(worst, 1e-6 * 100.0);
  for (double x : {1e-3, 3.3e-3, 5e-3, 8.7e-3}) {
    const Vec2 e = field_at(grid, {x, 2.1e-4});
    EXPECT_NEAR(e.x, -1e4, 1e2);
    EXPECT_NEAR(e.r, 0.0, 1e2);
  }
}

TEST(Laplace, CoaxialCylindersMatchLogProfile) {
  const double b = 4e-3;
  const std::size_t cells = 200;  // h = domain / 200
  const std::size_t inner = 20;
  auto layout = fixtures::coax_layout(b, cells, inner);
  const double h = layout->spacing();
  const double a = static_cast<double>(inner) * h;
  const double v0 = 100.0;
  const PotentialGrid grid = solve_laplace(layout, std::vector<double>{0.0, v0, 0.0});
  for (std::size_t j = inner + 1; j < cells; j += 7) {
    const double r = static_cast<double>(j) * h;
    const double exact = v0 * std::log(b / r) / std::log(b / a);
    EXPECT_NEAR(grid.node(3, j), exact, 0.01 * v0) << "r = " << r;
    if (r < 0.5 * b) EXPECT_NEAR(grid.node(3, j), exact, 0.01 * exact);
  }
  for (double r : {0.6e-3, 0.8e-3, 1.5e-3, 2.5e-3}) {
    const double er = v0 / (r * std::log(b / a));
    EXPECT_NEAR(field_at(grid, {2.5 * h, r}).r, er, 0.01 * er) << "r = " << r;
  }
}

TEST(Laplace, RefinementConverges) {
  const double b = 4e-3;
  const double v0 = 100.0;
  double previous = 1e300;
  for (std::size_t cells : {50u, 100u, 200u}) {
    auto layout = fixtures::coax_layout(b, cells, cells / 10);
    const PotentialGrid grid = solve_laplace(layout, std::vector<double>{0.0, v0, 0.0}, {1e-9 * v0, 400000, {}});
    const double probe = 0.5 * b;
    const double exact = v0 * std::log(2.0) / std::log(10.0);
    const double err = std::abs(grid.potential({2.5 * layout->spacing(), probe}) - exact);
    EXPECT_LT(err, previous);
    previous = err;
  }
}

TEST(Laplace, UniformVoltageIsConstant) {
  const Geometry g = build_geometry(GeometryConfig{});
  const PotentialGrid grid = solve_laplace(g.shared_layout(), std::vector<double>(5, -5.0));
  for (double v : grid.values()) ASSERT_DOUBLE_EQ(v, -5.0);
  const Vec2 e = field_at(grid, {3e-3, 0.5e-3});
  EXPECT_EQ(e.x, 0.0);
  EXPECT_EQ(e.r, 0.0);
}

TEST(Laplace, MaximumPrincipleAndResidual) {
  const PotentialGrid& grid = fig4a_grid();
  EXPECT_LE(max_principle_violation(grid), 0.0);
  EXPECT_LT(grid.stats().error_estimate, grid.stats().tolerance);
  EXPECT_GT(grid.stats().iterations, 0);
}

TEST(Laplace, Linearity) {
  const Geometry g = build_geometry(GeometryConfig{});
  const SolverOptions o{1e-3, 200000, {}};
  const PotentialGrid a = solve_laplace(g, {-1000.0, 0.0, 0.0}, o);
  const PotentialGrid b = solve_laplace(g, {0.0, 300.0, 0.0}, o);
  const PotentialGrid ab = solve_laplace(g, {-2000.0, 150.0, 0.0}, o);
  double worst = 0.0;
  for (std::size_t k = 0; k < ab.values().size(); ++k) {
    worst = std::max(worst, std::abs(ab.values()[k] - (2.0 * a.values()[k] + 0.5 * b.values()[k])));
  }
  EXPECT_LT(worst, 10.0 * o.tolerance);
}

TEST(Laplace, FieldBasisMatchesDirectSolve) {
  const Geometry g = build_geometry(GeometryConfig{});
  const FieldBasis basis(g.shared_layout(), {electrodes::kTip, electrodes::kCounter});
  const PotentialGrid combined = basis.combine(g, {-1600.0, 200.0, 0.0});
  const PotentialGrid& direct = fig4a_grid();
  double worst = 0.0;
  for (std::size_t k = 0; k < direct.values().size(); ++k) {
    worst = std::max(worst, std::abs(direct.values()[k] - combined.values()[k]));
  }
  EXPECT_LT(worst, 10.0 * direct.stats().tolerance);
}

TEST(Laplace, NonConvergenceCarriesResidual) {
  const Geometry g = build_geometry(GeometryConfig{});
  try {
    solve_laplace(g, {-1600.0, 200.0, 0.0}, {1e-9, 3, {}});
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.iterations(), 3);
    EXPECT_GT(e.residual(), 1e-9);
  }
}

TEST(Field, AxisFieldAcceleratesElectronsDownstream) {
  const PotentialGrid& grid = fig4a_grid();
  const GeometryConfig c;
  const double mid = 0.5 * (c.tip_apex_x + c.aperture1_x);
  EXPECT_LT(field_at(grid, {mid, 0.0}).x, 0.0);
}

TEST(Field, ContinuousAcrossCellBoundaries) {
  const PotentialGrid& grid = fig4a_grid();
  const double h = grid.layout().spacing();
  const double x = 60.0 * h;
  const Vec2 left = field_at(grid, {x - 1e-9 * h, 10.5 * h});
  const Vec2 right = field_at(grid, {x + 1e-9 * h, 10.5 * h});
  EXPECT_NEAR(left.x, right.x, 1e-5 * std::abs(left.x) + 1e-6);
  EXPECT_NEAR(left.r, right.r, 1e-5 * std::abs(left.r) + 1e-6);
}

TEST(Field, OutsideDomainThrows) {
  const PotentialGrid& grid = fig4a_grid();
  EXPECT_THROW(field_at(grid, {-1e-3, 0.0}), DomainError);
  EXPECT_THROW(field_at(grid, {1e-3, 1.0}), DomainError);
  EXPECT_THROW(field_at(grid, {0.5 * GeometryConfig{}.tip_apex_x, 0.0}), DomainError);
}
