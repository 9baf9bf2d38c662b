#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cohsrc/emission.hpp"
#include "cohsrc/errors.hpp"

using namespace cohsrc;

namespace {

// Root of ln 33 = 2 ln(p2/p1) + b (1/p1 - 1/p2) by bisection.
double anchor_b() {
  const double p1 = 1480.3;
  const double p2 = 1799.7;
  auto f = [&](double b) { return 2.0 * std::log(p2 / p1) + b * (1.0 / p1 - 1.0 / p2) - std::log(33.0); };
  double lo = 0.0;
  double hi = 1e6;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(FowlerNordheim, DefaultBMatchesAnchorRoot) {
  EXPECT_NEAR(default_fn_params().b, anchor_b(), 1e-9 * anchor_b());
}

TEST(FowlerNordheim, FactorThirtyThree) {
  const FNParams p = default_fn_params();
  EXPECT_NEAR(fn_rate(p, 1799.7) / fn_rate(p, 1480.3), 33.0, 1e-9);
}

TEST(FowlerNordheim, RateIsMonotone) {
  const FNParams p = default_fn_params();
  double previous = 0.0;
  for (double phi = 100.0; phi < 3000.0; phi += 50.0) {
    const double r = fn_rate(p, phi);
    EXPECT_GT(r, previous);
    previous = r;
  }
}

TEST(FowlerNordheim, PlotIsExactLine) {
  const FNParams p{2.5e3, 1.7e4};
  const auto pts = fn_plot(p, 1000.0, 2000.0, 3);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_LT(fn_collinearity_residual(pts), 1e-12);
  const double slope = (pts[2].ln_rate_over_phi2 - pts[0].ln_rate_over_phi2) / (pts[2].inv_phi - pts[0].inv_phi);
  EXPECT_NEAR(slope, -p.b, 1e-9 * p.b);
  EXPECT_NEAR(pts[0].ln_rate_over_phi2 + p.b * pts[0].inv_phi, std::log(p.a), 1e-9);
}

TEST(FowlerNordheim, PlotWithTwoPointsIsEndpoints) {
  const auto pts = fn_plot(default_fn_params(), 1480.0, 1800.0, 2);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_DOUBLE_EQ(pts[0].inv_phi, 1.0 / 1480.0);
  EXPECT_DOUBLE_EQ(pts[1].inv_phi, 1.0 / 1800.0);
}

TEST(FowlerNordheim, AnchorRangeSlope) {
  const auto pts = fn_plot(default_fn_params(), 1480.0, 1800.0, 25);
  const double slope = (pts.back().ln_rate_over_phi2 - pts.front().ln_rate_over_phi2) /
                       (pts.back().inv_phi - pts.front().inv_phi);
  EXPECT_NEAR(slope, -anchor_b(), 1e-8 * anchor_b());
}

TEST(Calibration, TwoPointsExact) {
  const FNParams p{812.0, 22000.0};
  const std::vector<FnPoint> pts{{1400.0, fn_rate(p, 1400.0)}, {1900.0, fn_rate(p, 1900.0)}};
  const FnCalibration c = calibrate_fn(pts);
  EXPECT_NEAR(c.params.a, p.a, 1e-10 * p.a);
  EXPECT_NEAR(c.params.b, p.b, 1e-10 * p.b);
}

TEST(Calibration, RoundTripThroughPlot) {
  const FNParams p = default_fn_params();
  std::vector<FnPoint> pts;
  for (double phi = 1400.0; phi <= 1900.0; phi += 25.0) pts.push_back({phi, fn_rate(p, phi)});
  const FnCalibration c = calibrate_fn(pts);
  EXPECT_NEAR(c.params.a, p.a, 1e-10 * p.a);
  EXPECT_NEAR(c.params.b, p.b, 1e-10 * p.b);
  EXPECT_LT(c.residual, 1e-10);
}

TEST(Calibration, AnchorPairGivesDerivedB) {
  const std::vector<FnPoint> pts{{1480.3, 100.0}, {1799.7, 3300.0}};
  EXPECT_NEAR(calibrate_fn(pts).params.b, anchor_b(), 1e-9 * anchor_b());
}

TEST(Calibration, NoisyPointsWithinFivePercent) {
  const FNParams p = default_fn_params();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> noise(-0.02, 0.02);
    std::vector<FnPoint> pts;
    for (double phi = 1450.0; phi <= 1850.0; phi += 20.0) pts.push_back({phi, fn_rate(p, phi) * (1.0 + noise(rng))});
    EXPECT_NEAR(calibrate_fn(pts).params.b, p.b, 0.05 * p.b) << "seed " << seed;
  }
}

TEST(Calibration, DegenerateInputThrows) {
  const std::vector<FnPoint> same{{1500.0, 10.0}, {1500.0, 20.0}};
  EXPECT_THROW(calibrate_fn(same), FitError);
  const std::vector<FnPoint> falling{{1500.0, 20.0}, {1600.0, 10.0}};
  EXPECT_THROW(calibrate_fn(falling), FitError);
}

TEST(Drive, PotentialDifferenceOnly) {
  const FNParams p = default_fn_params();
  const double a = detector_rate(p, {-1600.0, 150.0, 0.0});
  const double b = detector_rate(p, {-1750.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(a, b);
  EXPECT_DOUBLE_EQ(fn_drive_voltage(p, {-1600.0, 199.7, 0.0}), 1799.7);
}

TEST(Drive, TipVoltageIgnoresCounter) {
  FNParams p = default_fn_params();
  p.drive = FnDrive::kTipVoltage;
  EXPECT_DOUBLE_EQ(fn_drive_voltage(p, {-1600.0, 199.7, 0.0}), 1600.0);
  EXPECT_EQ(fn_drive_from_string(to_string(p.drive)), FnDrive::kTipVoltage);
}

TEST(Drive, TransmissionScalesDetectorRate) {
  FNParams p = default_fn_params();
  const double full = detector_rate(p, {-1600.0, 0.0, 0.0});
  p.transmission = 0.25;
  EXPECT_DOUBLE_EQ(detector_rate(p, {-1600.0, 0.0, 0.0}), 0.25 * full);
}
