#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cohsrc/errors.hpp"
#include "cohsrc/events_correlation.hpp"

using namespace cohsrc;

namespace {

constexpr double kPi = 3.14159265358979323846;

FringeParams pattern(double contrast) {
  FringeParams p;
  p.contrast = contrast;
  p.spacing = 2.45e-3;
  p.phi0 = 0.3;
  p.envelope_width = 12.0 * 2.45e-3;
  return p;
}

std::size_t bins_for(const EventList& e, double spacing) {
  return static_cast<std::size_t>(std::lround((e.window.x_max - e.window.x_min) / spacing * 10.0));
}

std::vector<double> grid_40_60() {
  std::vector<double> f;
  for (int k = 40; k <= 60; ++k) f.push_back(k);
  return f;
}

// Time average of cos(A sin wt) over one period by the midpoint rule; equals J0(A).
double time_average(double a) {
  const int n = 4096;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::cos(a * std::sin(2.0 * kPi * (i + 0.5) / n));
  return s / n;
}

}  // namespace

TEST(Events, SeedDeterminism) {
  const auto a = generate_events(pattern(0.5), {0.4 * kPi, 50.0, 0.0}, 1000.0, 20.0, 7);
  const auto b = generate_events(pattern(0.5), {0.4 * kPi, 50.0, 0.0}, 1000.0, 20.0, 7);
  const auto c = generate_events(pattern(0.5), {0.4 * kPi, 50.0, 0.0}, 1000.0, 20.0, 8);
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    ASSERT_EQ(a.events[i].t, b.events[i].t);
    ASSERT_EQ(a.events[i].x, b.events[i].x);
    ASSERT_EQ(a.events[i].y, b.events[i].y);
  }
  EXPECT_NE(a.events.front().x, c.events.front().x);
}

TEST(Events, PoissonRateAndWindow) {
  const auto e = generate_events(pattern(0.5), {}, 1000.0, 100.0, 3);
  EXPECT_NEAR(static_cast<double>(e.events.size()), 1e5, 5.0 * std::sqrt(1e5));
  EXPECT_TRUE(std::is_sorted(e.events.begin(), e.events.end(), [](auto& a, auto& b) { return a.t < b.t; }));
  for (const auto& ev : e.events) ASSERT_TRUE(e.window.contains(ev.x, ev.y));
}

TEST(Events, BesselTimeAverageOracle) {
  for (double a : {0.0, 0.4 * kPi, 0.435 * kPi, 2.0}) EXPECT_NEAR(time_average(a), std::cyl_bessel_j(0.0, a), 1e-12);
}

TEST(HistogramContrast, NoDephasingRecoversContrast) {
  for (double c : {0.513, 0.198}) {
    const auto e = generate_events(pattern(c), {}, 1000.0, 300.0, 11);
    const FringeFit fit = histogram_contrast(e, bins_for(e, 2.45e-3));
    EXPECT_NEAR(fit.params.contrast, c, 0.02);
  }
}

TEST(HistogramContrast, DephasingFollowsBesselLaw) {
  const double c = 0.535;
  const double a = 0.4 * kPi;
  const auto e = generate_events(pattern(c), {a, 50.0, 0.0}, 1e4, 100.0, 5);
  const FringeFit fit = histogram_contrast(e, bins_for(e, 2.45e-3));
  const double expected = c * std::abs(time_average(a));
  EXPECT_NEAR(fit.params.contrast, expected, 0.02 * expected);
}

TEST(HistogramContrast, FrozenPhaseShortDuration) {
  const auto e = generate_events(pattern(0.535), {0.4 * kPi, 50.0, 0.0}, 1e9, 1e-4, 5);
  const FringeFit fit = histogram_contrast(e, bins_for(e, 2.45e-3));
  EXPECT_NEAR(fit.params.contrast, 0.535, 0.03);
}

TEST(HistogramContrast, UniformEventsHaveNoContrast) {
  const auto e = generate_events(pattern(0.0), {}, 1000.0, 300.0, 2);
  try {
    const FringeFit fit = histogram_contrast(e, bins_for(e, 2.45e-3));
    EXPECT_LT(fit.params.contrast, 3.0 * fit.sigma.contrast + 0.01);
  } catch (const FitError&) {
    SUCCEED();
  }
}

TEST(G2, RecoversPlantedContrastAndAmplitude) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto e = generate_events(pattern(0.535), {0.4 * kPi, 50.0, 0.0}, 1000.0, 300.0, seed);
    const G2Result r = g2_contrast(e, 2.45e-3, grid_40_60());
    EXPECT_NEAR(r.c_corrected, 0.535, 0.03) << "seed " << seed;
    EXPECT_NEAR(r.amplitude, 0.4 * kPi, 0.05 * kPi) << "seed " << seed;
    EXPECT_FALSE(r.low_statistics);
    EXPECT_EQ(r.frequency, 50.0);
  }
}

TEST(G2, LowEnergyScenario) {
  const auto e = generate_events(pattern(0.377), {0.435 * kPi, 50.0, 0.0}, 1000.0, 300.0, 4);
  const G2Result r = g2_contrast(e, 2.45e-3, grid_40_60());
  EXPECT_NEAR(r.c_corrected, 0.377, 0.03);
  EXPECT_NEAR(r.amplitude, 0.435 * kPi, 0.05 * kPi);
}

TEST(G2, NoDephasingAgreesWithHistogram) {
  const auto e = generate_events(pattern(0.34), {}, 1000.0, 300.0, 9);
  const G2Result r = g2_contrast(e, 2.45e-3, grid_40_60());
  const FringeFit fit = histogram_contrast(e, bins_for(e, 2.45e-3));
  EXPECT_NEAR(r.c_corrected, fit.params.contrast, 3.0 * (r.c_sigma + fit.sigma.contrast));
}

TEST(G2, OrderIndependent) {
  const auto e = generate_events(pattern(0.535), {0.4 * kPi, 50.0, 0.0}, 1000.0, 60.0, 6);
  EventList shuffled = e;
  std::mt19937_64 rng(1);
  std::shuffle(shuffled.events.begin(), shuffled.events.end(), rng);
  const G2Result a = g2_contrast(e, 2.45e-3, grid_40_60());
  const G2Result b = g2_contrast(shuffled, 2.45e-3, grid_40_60());
  EXPECT_EQ(a.c_corrected, b.c_corrected);
  EXPECT_EQ(a.amplitude, b.amplitude);
}

TEST(G2, TooFewEvents) {
  const auto e = generate_events(pattern(0.5), {}, 1000.0, 5.0, 1);
  EXPECT_THROW(g2_contrast(e, 2.45e-3, grid_40_60()), PreconditionError);
}
