#include "cohsrc/emission.hpp"

#include <algorithm>
#include <cmath>

#include "cohsrc/errors.hpp"

namespace cohsrc {

std::string to_string(FnDrive drive) {
  return drive == FnDrive::kTipVoltage ? "tip_voltage" : "potential_difference";
}

FnDrive fn_drive_from_string(const std::string& text) {
  if (text == "tip_voltage") return FnDrive::kTipVoltage;
  if (text == "potential_difference") return FnDrive::kPotentialDifference;
  throw ValidationError("unknown emission drive '" + text + "'");
}

FNParams default_fn_params() {
  constexpr double kLow = 1480.3;
  constexpr double kHigh = 1799.7;
  constexpr double kRatio = 33.0;
  constexpr double kRateAtHigh = 1.0e4;
  FNParams p;
  p.b = (std::log(kRatio) - 2.0 * std::log(kHigh / kLow)) / (1.0 / kLow - 1.0 / kHigh);
  p.a = kRateAtHigh / (kHigh * kHigh * std::exp(-p.b / kHigh));
  return p;
}

double fn_drive_voltage(const FNParams& params, const ElectrodeVoltages& voltages) {
  const double phi = params.drive == FnDrive::kTipVoltage ? -voltages.u_sat : voltages.u_c - voltages.u_sat;
  if (!(phi > 0.0)) throw DomainError("emission drive voltage must be positive");
  return phi;
}

double fn_rate(const FNParams& params, double phi) {
  if (!(phi > 0.0)) throw DomainError("Fowler-Nordheim drive voltage must be positive");
  return params.a * phi * phi * std::exp(-params.b / phi);
}

double detector_rate(const FNParams& params, const ElectrodeVoltages& voltages) {
  return params.transmission * fn_rate(params, fn_drive_voltage(params, voltages));
}

FnPlotPoint to_fn_coordinates(const FnPoint& point) {
  if (!(point.phi > 0.0)) throw DomainError("Fowler-Nordheim drive voltage must be positive");
  if (!(point.rate > 0.0)) throw DomainError("count rate must be positive");
  return {1.0 / point.phi, std::log(point.rate / (point.phi * point.phi))};
}

FnCalibration calibrate_fn(std::span<const FnPoint> points) {
  if (points.size() < 2) throw FitError("calibration needs at least two points", 0.0);
  std::vector<FnPlotPoint> fn;
  fn.reserve(points.size());
  for (const auto& p : points) fn.push_back(to_fn_coordinates(p));

  // Centred sums keep the two-point case exact to rounding.
  double mx = 0.0;
  double my = 0.0;
  for (const auto& q : fn) {
    mx += q.inv_phi;
    my += q.ln_rate_over_phi2;
  }
  const double count = static_cast<double>(fn.size());
  mx /= count;
  my /= count;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& q : fn) {
    sxx += (q.inv_phi - mx) * (q.inv_phi - mx);
    sxy += (q.inv_phi - mx) * (q.ln_rate_over_phi2 - my);
  }
  if (!(sxx > 1e-30 * mx * mx)) throw FitError("calibration points share a single drive voltage", 0.0);
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;

  double ss = 0.0;
  for (const auto& q : fn) {
    const double d = q.ln_rate_over_phi2 - (intercept + slope * q.inv_phi);
    ss += d * d;
  }
  FnCalibration out;
  out.params.a = std::exp(intercept);
  out.params.b = -slope;
  out.residual = std::sqrt(ss / count);
  out.points = fn.size();
  if (!(out.params.b > 0.0)) throw FitError("calibrated exponent b is not positive", ss);
  return out;
}

std::vector<FnPlotPoint> fn_plot(const FNParams& params, double phi_min, double phi_max, std::size_t n) {
  if (n < 2) throw DomainError("fn_plot needs at least two points");
  if (!(phi_min > 0.0) || !(phi_max > phi_min)) throw DomainError("fn_plot needs 0 < phi_min < phi_max");
  std::vector<FnPlotPoint> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double phi = phi_min + (phi_max - phi_min) * static_cast<double>(i) / static_cast<double>(n - 1);
    out.push_back(to_fn_coordinates({phi, fn_rate(params, phi)}));
  }
  return out;
}

double fn_collinearity_residual(std::span<const FnPlotPoint> points) {
  if (points.size() < 3) return 0.0;
  const auto& p0 = points.front();
  const auto& p1 = points.back();
  const double slope = (p1.ln_rate_over_phi2 - p0.ln_rate_over_phi2) / (p1.inv_phi - p0.inv_phi);
  double worst = 0.0;
  for (const auto& q : points) {
    const double line = p0.ln_rate_over_phi2 + slope * (q.inv_phi - p0.inv_phi);
    worst = std::max(worst, std::abs(q.ln_rate_over_phi2 - line));
  }
  return worst;
}

}  // namespace cohsrc
