#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace cohsrc {

/// Non-relativistic de Broglie wavelength (m) after acceleration through U volts.
double de_broglie(double u);
/// Inverse of de_broglie: acceleration voltage (V) for wavelength `lambda` (m).
double acceleration_voltage(double lambda);

inline constexpr double kDefaultBiprismVoltage = 0.331;  // V

/// gamma such that Theta = gamma * U_BP / |U_SAT| gives fringe spacing `s0` at the entrance
/// of the quadrupole for electrons accelerated by |u_sat|.
double calibrate_biprism_constant(double s0, double u_sat, double u_bp);
/// Calibrated to s0 = 928 nm at U_SAT = -600 V, U_BP = 0.331 V.
double default_biprism_constant();

/// Theta = gamma * U_BP / |U_SAT| (rad).
double superposition_angle(double gamma, double u_bp, double u_sat);

struct BeamParams {
  double kinetic_energy_ev = 0.0;
  double wavelength = 0.0;  // m
  double u_sat = 0.0;       // V
  double u_bp = 0.0;        // V
  double gamma = 0.0;       // rad
  double theta = 0.0;       // rad
  double magnification = 1.0;
  double s0 = 0.0;  // m, before magnification
  double s = 0.0;   // m, on the detector
};

/// Beam for electrons emitted at rest from a tip at `u_sat` (negative in normal operation).
BeamParams make_beam(double u_sat, double u_bp, double gamma, double magnification);

struct FringeSpacing {
  double s0 = 0.0;
  double s = 0.0;
};

/// s0 = lambda / (2 Theta), s = M s0. DomainError for Theta = 0 or M <= 0.
FringeSpacing fringe_spacing(const BeamParams& beam);

/// M = s_detector / s0_theory.
double magnification_from_measurement(double s_detector, double s0_theory);

/// Empirical magnification versus |U_SAT|, interpolated linearly in (log U, log M) and
/// extrapolated along the end segments.
class MagnificationTable {
 public:
  explicit MagnificationTable(std::vector<std::pair<double, double>> points);

  double at(double u_sat) const;
  const std::vector<std::pair<double, double>>& points() const noexcept { return points_; }

 private:
  std::vector<std::pair<double, double>> points_;  // (|U_SAT|, M), sorted by voltage
};

/// Table whose entries reproduce detector spacings measured at (|U_SAT|, s) pairs.
MagnificationTable magnification_table_from_spacings(std::span<const std::pair<double, double>> spacings,
                                                     double gamma, double u_bp);

/// Anchored at s = 2.59 mm for U_SAT = -1560 V and s = 1.89 mm for lambda = 28.9 pm.
MagnificationTable default_magnification_table(double gamma, double u_bp);

/// sin(u)/u with sinc(0) = 1.
double sinc(double u);

/// Parameters of I(x) = I0 (1 + C cos(2 pi x / s + phi0)) sinc^2(2 pi x / s1 + phi1).
struct FringeParams {
  double i0 = 1.0;
  double contrast = 0.0;
  double spacing = 1.0;         // s
  double phi0 = 0.0;
  double envelope_width = 1.0;  // s1
  double phi1 = 0.0;
};

double intensity_pattern(const FringeParams& p, double x);

/// Centre of the sinc^2 envelope, where 2 pi x / s1 + phi1 = 0.
double envelope_center(const FringeParams& p);

struct Histogram {
  std::vector<double> centers;  // uniform bin centres
  std::vector<double> counts;

  double bin_width() const;
  double total() const;
};

/// Equal-width histogram of `values` over [lo, hi).
Histogram make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins);

/// Running mean of the counts over a box one `period` wide (fractional edge bins weighted by
/// overlap, truncated at the histogram ends). Removes fringes of that period.
std::vector<double> period_average(const Histogram& histogram, double period);

struct FringeFit {
  FringeParams params;
  FringeParams sigma;
  double chi2 = 0.0;
  long dof = 0;
  bool contrast_pinned = false;  // the unconstrained optimum had C > 1

  double reduced_chi2() const noexcept { return dof > 0 ? chi2 / static_cast<double>(dof) : 0.0; }
};

/// Initial guess from the histogram alone: spacing from the dominant spectral peak, envelope
/// from the one-period running mean, contrast from (max - min)/(max + min) near its centre.
FringeParams initial_fringe_guess(const Histogram& histogram);

/// Unweighted least-squares fit of I(x) to the bin counts; covariance scaled by chi2/dof.
/// Throws FitError on failure and PreconditionError for fewer than 8 bins or negative counts.
FringeFit fit_fringes(const Histogram& histogram);

/// Fringe periods (rounded) inside the main envelope lobe where sinc^2 >= threshold.
int count_fringes(const FringeParams& p, double threshold);

}  // namespace cohsrc
