#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cohsrc/beam_optics.hpp"
#include "cohsrc/errors.hpp"

using namespace cohsrc;

namespace {

constexpr double kPi = 3.14159265358979323846;

// lambda = h / sqrt(2 m e U), CODATA values.
double lambda_oracle(double u) { return 6.62607015e-34 / std::sqrt(2.0 * 9.1093837015e-31 * 1.602176634e-19 * u); }

FringeParams planted() {
  FringeParams p;
  p.i0 = 1800.0;
  p.contrast = 0.535;
  p.spacing = 2.45e-3;
  p.phi0 = 0.7;
  p.envelope_width = 12.0 * 2.45e-3;
  p.phi1 = -0.4;
  return p;
}

Histogram sample(const FringeParams& p, double lo, double hi, std::size_t bins) {
  Histogram h;
  const double w = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    const double x = lo + (static_cast<double>(i) + 0.5) * w;
    h.centers.push_back(x);
    h.counts.push_back(intensity_pattern(p, x));
  }
  return h;
}

}  // namespace

TEST(DeBroglie, ReferenceWavelengths) {
  EXPECT_NEAR(de_broglie(1600.0), 30.7e-12, 0.05e-12);
  EXPECT_NEAR(de_broglie(600.0), 50e-12, 0.1e-12);
  EXPECT_NEAR(de_broglie(1560.0), 31.1e-12, 0.05e-12);
}

TEST(DeBroglie, ScalingAndOracle) {
  for (double u : {100.0, 600.0, 1600.0, 1801.0}) {
    EXPECT_NEAR(de_broglie(u), lambda_oracle(u), 1e-12 * lambda_oracle(u));
    EXPECT_NEAR(de_broglie(4.0 * u), 0.5 * de_broglie(u), 1e-15);
    EXPECT_NEAR(acceleration_voltage(de_broglie(u)), u, 1e-9 * u);
  }
  EXPECT_THROW(de_broglie(0.0), DomainError);
}

TEST(Spacing, CalibratedAt600Volts) {
  const BeamParams b = make_beam(-600.0, kDefaultBiprismVoltage, default_biprism_constant(), 9698.0);
  const FringeSpacing s = fringe_spacing(b);
  EXPECT_NEAR(s.s0, 928e-9, 1e-12);
  EXPECT_NEAR(s.s, 9.0e-3, 0.3e-3);
}

TEST(Spacing, ZeroAngleThrows) {
  BeamParams b = make_beam(-1600.0, kDefaultBiprismVoltage, default_biprism_constant(), 1000.0);
  b.theta = 0.0;
  EXPECT_THROW(fringe_spacing(b), DomainError);
}

TEST(Spacing, DecreasesWithTipVoltage) {
  const double gamma = default_biprism_constant();
  const MagnificationTable table = default_magnification_table(gamma, kDefaultBiprismVoltage);
  double previous = 1e300;
  for (double u = 1400.0; u <= 2000.0; u += 20.0) {
    const double s = make_beam(-u, kDefaultBiprismVoltage, gamma, table.at(-u)).s;
    EXPECT_LT(s, previous) << u;
    previous = s;
  }
}

TEST(Spacing, TableReproducesAnchors) {
  const double gamma = default_biprism_constant();
  const MagnificationTable table = default_magnification_table(gamma, kDefaultBiprismVoltage);
  EXPECT_NEAR(make_beam(-1560.0, kDefaultBiprismVoltage, gamma, table.at(-1560.0)).s, 2.59e-3, 1e-9);
  const double u = acceleration_voltage(28.9e-12);
  EXPECT_NEAR(make_beam(-u, kDefaultBiprismVoltage, gamma, table.at(-u)).s, 1.89e-3, 1e-9);
}

TEST(Magnification, FromMeasurement) {
  const double m = magnification_from_measurement(9.0e-3, 928e-9);
  EXPECT_NEAR(m, 9698.0, 1.0);
  EXPECT_GE(m, 9730.0 - 290.0);
  EXPECT_LE(m, 9730.0 + 290.0);
  EXPECT_DOUBLE_EQ(magnification_from_measurement(3e-3, 3e-3), 1.0);
  EXPECT_DOUBLE_EQ(magnification_from_measurement(6e-3, 3e-3), 2.0);
}

TEST(Pattern, ZeroContrastIsEnvelope) {
  FringeParams p = planted();
  p.contrast = 0.0;
  for (double x = -0.02; x < 0.02; x += 1.3e-4) {
    const double u = 2.0 * kPi * x / p.envelope_width + p.phi1;
    const double s = u == 0.0 ? 1.0 : std::sin(u) / u;
    EXPECT_NEAR(intensity_pattern(p, x), p.i0 * s * s, 1e-9 * p.i0);
  }
}

TEST(Pattern, CentreValue) {
  FringeParams p = planted();
  p.phi0 = 0.0;
  p.phi1 = 0.0;
  EXPECT_DOUBLE_EQ(intensity_pattern(p, 0.0), p.i0 * (1.0 + p.contrast));
}

TEST(Pattern, MaxMinRatio) {
  FringeParams p = planted();
  p.phi0 = 0.0;
  p.phi1 = 0.0;
  p.envelope_width = 200.0 * p.spacing;
  const double ratio = intensity_pattern(p, 0.0) / intensity_pattern(p, 0.5 * p.spacing);
  EXPECT_NEAR(ratio, (1.0 + p.contrast) / (1.0 - p.contrast), 1e-3);
}

TEST(Fit, NoiselessRoundTrip) {
  const FringeParams p = planted();
  const double c = envelope_center(p);
  const Histogram h = sample(p, c - p.envelope_width, c + p.envelope_width, 240);
  const FringeFit fit = fit_fringes(h);
  EXPECT_NEAR(fit.params.i0, p.i0, 1e-6 * p.i0);
  EXPECT_NEAR(fit.params.contrast, p.contrast, 1e-6 * p.contrast);
  EXPECT_NEAR(fit.params.spacing, p.spacing, 1e-6 * p.spacing);
  EXPECT_NEAR(fit.params.phi0, p.phi0, 1e-6 * std::abs(p.phi0));
  EXPECT_NEAR(fit.params.envelope_width, p.envelope_width, 1e-6 * p.envelope_width);
  EXPECT_NEAR(fit.params.phi1, p.phi1, 1e-6 * std::abs(p.phi1));
}

TEST(Fit, ContrastInvariantUnderRescaling) {
  const FringeParams p = planted();
  Histogram h = sample(p, -0.03, 0.03, 240);
  const double c1 = fit_fringes(h).params.contrast;
  for (auto& v : h.counts) v *= 7.0;
  EXPECT_NEAR(fit_fringes(h).params.contrast, c1, 1e-9);
}

TEST(Fit, PoissonSampledContrast) {
  FringeParams p = planted();
  p.contrast = 0.339;
  const double c = envelope_center(p);
  const Histogram exact = sample(p, c - p.envelope_width, c + p.envelope_width, 240);
  double total = 0.0;
  for (double v : exact.counts) total += v;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    Histogram h = exact;
    for (auto& v : h.counts) v = static_cast<double>(std::poisson_distribution<long>(v * 3e5 / total)(rng));
    const FringeFit fit = fit_fringes(h);
    EXPECT_NEAR(fit.params.contrast, 0.339, 0.03) << "seed " << seed;
    EXPECT_NEAR(fit.params.spacing, p.spacing, 0.01 * p.spacing);
  }
}

TEST(Fit, FlatHistogramHasNoContrast) {
  std::mt19937_64 rng(3);
  Histogram h;
  for (int i = 0; i < 240; ++i) {
    h.centers.push_back(i * 1e-4);
    h.counts.push_back(static_cast<double>(std::poisson_distribution<long>(1000.0)(rng)));
  }
  try {
    const FringeFit fit = fit_fringes(h);
    EXPECT_LT(fit.params.contrast, 3.0 * fit.sigma.contrast + 0.01);
  } catch (const FitError&) {
    SUCCEED();
  }
}

TEST(Fit, TooFewBins) {
  Histogram h;
  h.centers = {0.0, 1.0, 2.0};
  h.counts = {1.0, 2.0, 1.0};
  EXPECT_THROW(fit_fringes(h), PreconditionError);
}

TEST(Count, SameRatioSameCount) {
  FringeParams p = planted();
  const int n = count_fringes(p, 0.1);
  for (double c : {0.1, 0.3, 0.9}) {
    p.contrast = c;
    EXPECT_EQ(count_fringes(p, 0.1), n);
  }
  p.spacing *= 3.0;
  p.envelope_width *= 3.0;
  EXPECT_EQ(count_fringes(p, 0.1), n);
}

TEST(Count, OnePeriod) {
  FringeParams p = planted();
  p.envelope_width = p.spacing;
  EXPECT_EQ(count_fringes(p, 0.01), 1);
}
