#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cohsrc/geometry_fields.hpp"

namespace cohsrc {

/// Which voltage the Fowler-Nordheim law is driven by.
enum class FnDrive {
  kTipVoltage,           // Phi = |U_SAT|
  kPotentialDifference,  // Phi = U_c - U_SAT
};

std::string to_string(FnDrive drive);
FnDrive fn_drive_from_string(const std::string& text);

/// rate = transmission * a * Phi^2 * exp(-b / Phi).
struct FNParams {
  double a = 0.0;  // Hz / V^2
  double b = 0.0;  // V
  FnDrive drive = FnDrive::kPotentialDifference;
  double transmission = 1.0;  // aperture clipping, constant in [0, 1]
};

/// Default parameters: b reproduces a rate ratio of 33 between Phi = 1480.3 V and 1799.7 V;
/// a normalises rate(1799.7 V) to 1e4 Hz (absolute scale is arbitrary).
FNParams default_fn_params();

/// Drive voltage Phi for `voltages`; DomainError when it is not positive.
double fn_drive_voltage(const FNParams& params, const ElectrodeVoltages& voltages);

/// a * Phi^2 * exp(-b / Phi). DomainError for Phi <= 0.
double fn_rate(const FNParams& params, double phi);

/// Rate after aperture clipping for the given electrode voltages.
double detector_rate(const FNParams& params, const ElectrodeVoltages& voltages);

struct FnPoint {
  double phi = 0.0;   // V
  double rate = 0.0;  // Hz
};

struct FnPlotPoint {
  double inv_phi = 0.0;         // 1/V
  double ln_rate_over_phi2 = 0.0;
};

FnPlotPoint to_fn_coordinates(const FnPoint& point);

struct FnCalibration {
  FNParams params;
  double residual = 0.0;  // rms deviation from the line in ln(rate/Phi^2)
  std::size_t points = 0;
};

/// Least-squares line through (1/Phi, ln(rate/Phi^2)). FitError for fewer than two distinct
/// Phi values; DomainError for non-positive Phi or rate.
FnCalibration calibrate_fn(std::span<const FnPoint> points);

/// n points in FN coordinates for Phi evenly spaced over [phi_min, phi_max].
std::vector<FnPlotPoint> fn_plot(const FNParams& params, double phi_min, double phi_max, std::size_t n);

/// Largest distance (in ln units) of the points from the line through the first and last.
double fn_collinearity_residual(std::span<const FnPlotPoint> points);

}  // namespace cohsrc
