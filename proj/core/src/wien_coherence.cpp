#include "cohsrc/wien_coherence.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cohsrc/errors.hpp"
#include "cohsrc/least_squares.hpp"
#include "cohsrc/physics_constants.hpp"

namespace cohsrc {

double matched_field(double v, double e_field) {
  if (!(v > 0.0)) throw DomainError("particle speed must be positive");
  return e_field / v;
}

double packet_shift(const WienConfig& config, double u_sat, double theta) {
  return packet_shift(config, u_sat, theta, config.u_wf);
}

double packet_shift(const WienConfig& config, double u_sat, double theta, double u_wf) {
  if (!(config.plate_length > 0.0) || !(config.plate_distance > 0.0) || !(config.d_wf_qp > 0.0)) {
    throw DomainError("Wien filter lengths must be positive");
  }
  if (u_sat == 0.0) throw DomainError("tip voltage must be non-zero");
  const double dx = theta * config.d_wf_qp;
  return config.plate_length / (2.0 * config.plate_distance) * (dx / std::abs(u_sat)) * u_wf;
}

double contrast_envelope(double delta_y, double sigma_y, double c0) {
  if (!(sigma_y > 0.0)) throw DomainError("envelope width must be positive");
  return c0 * std::exp(-delta_y * delta_y / (2.0 * sigma_y * sigma_y));
}

double ten_percent_factor() { return std::sqrt(2.0 * std::log(10.0)); }

double energy_width(double u_sat, double wavelength, double l_c) {
  if (!(l_c > 0.0)) throw DomainError("coherence length must be positive");
  return 2.0 * std::abs(u_sat) * wavelength / (constants::kPi * l_c);
}

CoherenceResult analyze_wien_sweep(std::span<const WienPoint> points, const BeamParams& beam,
                                   const WienConfig& config) {
  if (points.size() < 5) throw PreconditionError("Wien analysis needs at least 5 points");
  const bool weighted = std::all_of(points.begin(), points.end(), [](const WienPoint& p) { return p.sigma > 0.0; });

  // Moment-based start values.
  const auto top = std::max_element(points.begin(), points.end(),
                                    [](const WienPoint& a, const WienPoint& b) { return a.contrast < b.contrast; });
  double sw = 0.0;
  double mean = 0.0;
  for (const auto& p : points) {
    const double w = std::max(p.contrast, 0.0);
    sw += w;
    mean += w * p.u_wf;
  }
  mean = sw > 0.0 ? mean / sw : top->u_wf;
  double var = 0.0;
  for (const auto& p : points) var += std::max(p.contrast, 0.0) * (p.u_wf - mean) * (p.u_wf - mean);
  double sigma0 = sw > 0.0 ? std::sqrt(var / sw) : 0.0;
  const auto [umin, umax] = std::minmax_element(points.begin(), points.end(),
                                                [](const WienPoint& a, const WienPoint& b) { return a.u_wf < b.u_wf; });
  if (!(sigma0 > 0.0)) sigma0 = 0.25 * (umax->u_wf - umin->u_wf);

  const ResidualFunction residuals = [&](std::span<const double> q, std::span<double> r) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double d = points[i].u_wf - q[1];
      const double model = q[0] * std::exp(-d * d / (2.0 * q[2] * q[2]));
      r[i] = (model - points[i].contrast) / (weighted ? points[i].sigma : 1.0);
    }
  };
  LeastSquaresOptions opts;
  opts.scale_covariance = !weighted;
  const auto lsq = levenberg_marquardt(residuals, points.size(), {top->contrast, mean, sigma0}, opts);

  CoherenceResult out;
  out.weighted = weighted;
  out.c0 = lsq.params[0];
  out.c0_err = lsq.sigma[0];
  out.center_v = lsq.params[1];
  out.sigma_v = std::abs(lsq.params[2]);
  out.sigma_v_err = lsq.sigma[2];
  out.reduced_chi2 = lsq.reduced_chi2();
  out.extrapolated = out.center_v < umin->u_wf || out.center_v > umax->u_wf;
  if (!(out.sigma_v > 0.0) || !(out.c0 > 0.0)) throw FitError("Gaussian contrast fit is degenerate", lsq.chi2);

  const double shift_per_volt = packet_shift(config, beam.u_sat, beam.theta, 1.0);
  out.u_cl = ten_percent_factor() * out.sigma_v;
  out.l_c = 2.0 * std::abs(shift_per_volt) * out.u_cl;
  out.l_c_err = 2.0 * std::abs(shift_per_volt) * ten_percent_factor() * out.sigma_v_err;
  out.delta_e = energy_width(beam.u_sat, beam.wavelength, out.l_c);
  out.delta_e_err = out.delta_e * out.l_c_err / out.l_c;
  return out;
}

bool coherence_lengths_consistent(const CoherenceResult& a, const CoherenceResult& b) {
  return std::abs(a.l_c - b.l_c) <= a.l_c_err + b.l_c_err;
}

std::vector<WienPoint> synthesize_wien_sweep(const WienSweepSpec& spec, const BeamParams& beam,
                                             const WienConfig& config) {
  if (spec.steps < 5) throw PreconditionError("a Wien sweep needs at least 5 steps");
  if (!(spec.u_max > spec.u_min)) throw PreconditionError("Wien sweep range is empty");
  if (!(spec.l_c > 0.0)) throw DomainError("coherence length must be positive");
  const double shift_per_volt = std::abs(packet_shift(config, beam.u_sat, beam.theta, 1.0));
  const double u_cl = 0.5 * spec.l_c / shift_per_volt;
  const double sigma_v = u_cl / ten_percent_factor();

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.sigma_contrast > 0.0 ? spec.sigma_contrast : 1.0);
  std::vector<WienPoint> out;
  out.reserve(static_cast<std::size_t>(spec.steps));
  for (int i = 0; i < spec.steps; ++i) {
    // Descending from u_max, matching the experimental order.
    const double u = spec.u_max - (spec.u_max - spec.u_min) * i / (spec.steps - 1);
    double c = contrast_envelope(u - spec.center_v, sigma_v, spec.c0);
    if (spec.add_noise && spec.sigma_contrast > 0.0) c += noise(rng);
    out.push_back({u, c, spec.sigma_contrast});
  }
  return out;
}

}  // namespace cohsrc
