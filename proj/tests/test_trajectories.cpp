#include <gtest/gtest.h>

#include <cmath>

#include "cohsrc/errors.hpp"
#include "cohsrc/physics_constants.hpp"
#include "cohsrc/trajectories.hpp"
#include "test_support.hpp"

using namespace cohsrc;

namespace {

struct Rig {
  Geometry geometry;
  PotentialGrid grid;
  TraceOptions options;
};

Rig make_setup(double u_sat, double u_c) {
  Geometry g = build_geometry(GeometryConfig{});
  PotentialGrid grid = solve_laplace(g, {u_sat, u_c, 0.0});
  TraceOptions o;
  o.transmit_x = g.transmit_plane_x();
  return {std::move(g), std::move(grid), o};
}

const Rig& fig4a() {
  static const Rig s = make_setup(-1600.0, 200.0);
  return s;
}

const Rig& fig4c() {
  static const Rig s = make_setup(-600.0, 1378.0);
  return s;
}

Trajectory apex_trace(const Rig& s) {
  return integrate_trajectory(s.grid, {0.0, s.geometry.apex_launch_point(), {0.0, 0.0}}, s.options);
}

}  // namespace

TEST(Trajectory, FieldFreeStraightLine) {
  auto layout = fixtures::plates_layout(10e-3, 200);
  const PotentialGrid grid = solve_laplace(layout, std::vector<double>{0.0, 0.0, 0.0});
  TraceOptions o;
  o.transmit_x = 9e-3;
  const double v = 1e6;
  const Trajectory t = integrate_trajectory(grid, {0.0, {1e-3, 0.2e-3}, {v, 0.0}}, o);
  ASSERT_EQ(t.termination, Termination::kTransmitted);
  for (const auto& s : t.states) {
    EXPECT_DOUBLE_EQ(s.velocity.x, v);
    EXPECT_DOUBLE_EQ(s.position.r, 0.2e-3);
    EXPECT_NEAR(s.position.x, 1e-3 + v * s.t, 1e-15);
  }
}

TEST(Trajectory, UniformFieldMatchesKinematics) {
  const double length = 10e-3;
  auto layout = fixtures::plates_layout(length, 200);
  const PotentialGrid grid = solve_laplace(layout, std::vector<double>{0.0, 0.0, 100.0}, {1e-10, 400000, {}});
  TraceOptions o;
  o.transmit_x = 9e-3;
  o.dt_max = 2e-13;
  const double accel = constants::kElementaryCharge * 100.0 / length / constants::kElectronMass;
  const double x0 = 1e-3;
  const Trajectory t = integrate_trajectory(grid, {0.0, {x0, 0.3e-3}, {0.0, 0.0}}, o);
  ASSERT_EQ(t.termination, Termination::kTransmitted);
  ASSERT_GE(t.states.size(), 10000u);
  const auto& s = t.states[10000];
  const double exact = x0 + 0.5 * accel * s.t * s.t;
  EXPECT_NEAR(s.position.x, exact, 1e-6 * exact);
  EXPECT_NEAR(s.velocity.x, accel * s.t, 1e-6 * accel * s.t);
}

TEST(Trajectory, Fig4aApexReachesTipEnergy) {
  const Trajectory t = apex_trace(fig4a());
  ASSERT_EQ(t.termination, Termination::kTransmitted);
  EXPECT_NEAR(terminal_energy(t, fig4a().grid), 1600.0, 0.1);
  EXPECT_LT(max_relative_energy_error(t, fig4a().grid), 1e-6);
  EXPECT_FALSE(t.relativistic_flag);
}

TEST(Trajectory, Fig4cApexReachesTipEnergy) {
  const Trajectory t = apex_trace(fig4c());
  ASSERT_EQ(t.termination, Termination::kTransmitted);
  EXPECT_NEAR(terminal_energy(t, fig4c().grid), 600.0, 0.1);
  EXPECT_LT(max_relative_energy_error(t, fig4c().grid), 1e-6);
}

TEST(Trajectory, FieldFreeInjectionKeepsEnergy) {
  const Rig s = make_setup(0.0, 0.0);
  const ParticleState start{0.0, s.geometry.apex_launch_point(), {electron_speed(5.0), 0.0}};
  const Trajectory t = integrate_trajectory(s.grid, start, s.options);
  ASSERT_EQ(t.termination, Termination::kTransmitted);
  EXPECT_NEAR(terminal_energy(t, s.grid), 5.0, 1e-9);
}

TEST(Trajectory, OnAxisStaysOnAxis) {
  const Trajectory t = apex_trace(fig4a());
  for (const auto& s : t.states) {
    ASSERT_EQ(s.position.r, 0.0);
    ASSERT_EQ(s.velocity.r, 0.0);
  }
}

TEST(Trajectory, EnergyConservedAtEveryState) {
  const Rig& s = fig4c();
  LaunchFan fan;
  for (int k = 0; k <= 12; ++k) fan.polar_angles_rad.push_back(k * 10.0 * constants::kPi / 180.0);
  const BundleResult b = classify_bundle(s.grid, make_fan(s.geometry, fan), s.options);
  for (const auto& t : b.trajectories) {
    for (const auto& st : t.states) {
      const double e = total_energy_ev(s.grid, st);
      ASSERT_LT(std::abs(e - t.total_energy_ev) / 600.0, 1e-6);
    }
  }
}

TEST(Trajectory, TimeReversal) {
  const Rig& s = fig4a();
  TraceOptions o = s.options;
  o.step_limit = 3000;
  const ParticleState start{0.0, {1.5e-3, 0.2e-3}, {electron_speed(50.0) * 0.8, electron_speed(50.0) * 0.6}};
  const Trajectory fwd = integrate_trajectory(s.grid, start, o);
  ASSERT_EQ(fwd.termination, Termination::kStepLimit);
  ParticleState back = fwd.states.back();
  back.velocity = -1.0 * back.velocity;
  back.t = 0.0;
  const double duration = fwd.states.back().t;
  o.step_limit = 1000000;
  o.dt_max = s.options.dt_max;
  const Trajectory rev = integrate_trajectory(s.grid, back, o);
  // Closest approach of the reversed path to the start over the forward duration.
  double best = 1e300;
  for (const auto& st : rev.states) {
    if (st.t > 1.2 * duration) break;
    best = std::min(best, norm(st.position - start.position));
  }
  EXPECT_LT(best, 1e-4 * norm(start.position));
}

TEST(Trajectory, StepLimitIsReported) {
  TraceOptions o = fig4a().options;
  o.step_limit = 10;
  const Trajectory t = integrate_trajectory(fig4a().grid, {0.0, fig4a().geometry.apex_launch_point(), {0.0, 0.0}}, o);
  EXPECT_EQ(t.termination, Termination::kStepLimit);
  EXPECT_EQ(outcome_label(t, fig4a().grid.layout()), "step_limit");
  EXPECT_THROW(terminal_energy(t, fig4a().grid), StateError);
}

TEST(Trajectory, StartInsideElectrodeIsRejected) {
  const Rig& s = fig4a();
  EXPECT_THROW(integrate_trajectory(s.grid, {0.0, {0.5 * s.geometry.apex_node_x(), 0.0}, {}}, s.options),
               PreconditionError);
}

TEST(Bundle, Fig4cFanBendsBackOntoCounter) {
  const Rig& s = fig4c();
  LaunchFan fan;
  for (int k = 0; k <= 12; ++k) fan.polar_angles_rad.push_back(k * 10.0 * constants::kPi / 180.0);
  const BundleResult b = classify_bundle(s.grid, make_fan(s.geometry, fan), s.options);
  ASSERT_TRUE(b.histogram.count("hit:counter"));
  EXPECT_GE(b.histogram.at("hit:counter"), 1);
  EXPECT_EQ(b.trajectories.size(), 13u);
}

TEST(Bundle, Fig4aAxialLaunchesAllTransmitted) {
  const Rig& s = fig4a();
  LaunchFan fan;
  fan.polar_angles_rad = {0.0};
  std::vector<ParticleState> starts;
  for (double ke : {0.0, 0.5, 2.0}) {
    fan.initial_energy_ev = ke;
    for (const auto& st : make_fan(s.geometry, fan)) starts.push_back(st);
  }
  const BundleResult b = classify_bundle(s.grid, starts, s.options);
  EXPECT_EQ(b.histogram.size(), 1u);
  EXPECT_EQ(b.histogram.at("transmitted"), 3);
}

TEST(Bundle, EmptyFieldAxialLaunchesTransmitted) {
  const Rig s = make_setup(0.0, 0.0);
  LaunchFan fan;
  fan.polar_angles_rad = {0.0};
  fan.initial_energy_ev = 1.0;
  const BundleResult b = classify_bundle(s.grid, make_fan(s.geometry, fan), s.options);
  EXPECT_EQ(b.histogram.at("transmitted"), 1);
}

TEST(Trajectory, TerminalEnergyIndependentOfCounterVoltage) {
  const Geometry g = build_geometry(GeometryConfig{});
  const FieldBasis basis(g.shared_layout(), {electrodes::kTip, electrodes::kCounter});
  TraceOptions o;
  o.transmit_x = g.transmit_plane_x();
  for (double u_c : {-119.7, 40.0, 199.7}) {
    const PotentialGrid grid = basis.combine(g, {-1600.0, u_c, 0.0});
    const Trajectory t = integrate_trajectory(grid, {0.0, g.apex_launch_point(), {0.0, 0.0}}, o);
    ASSERT_EQ(t.termination, Termination::kTransmitted);
    EXPECT_NEAR(terminal_energy(t, grid), 1600.0, 0.1) << "U_c = " << u_c;
  }
}
