#include "cohsrc/beam_optics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include "cohsrc/errors.hpp"
#include "cohsrc/least_squares.hpp"
#include "cohsrc/physics_constants.hpp"

namespace cohsrc {

namespace {

using constants::kPi;

double momentum_scale() { return std::sqrt(2.0 * constants::kElectronMass * constants::kElementaryCharge); }

double wrap_phase(double phi) {
  double w = std::remainder(phi, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

// Root of a decreasing function on [lo, hi] by bisection.
template <class F>
double bisect_decreasing(F f, double target, double lo, double hi) {
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Half-width u > 0 of the sinc^2 main lobe at `level` of the peak.
double sinc2_half_width(double level) {
  return bisect_decreasing([](double u) { return sinc(u) * sinc(u); }, level, 0.0, kPi);
}

}  // namespace

std::vector<double> period_average(const Histogram& h, double period) {
  const double w = h.bin_width();
  const auto n = static_cast<long>(h.counts.size());
  const double half = 0.5 * period / w;
  std::vector<double> out(h.counts.size());
  for (long i = 0; i < n; ++i) {
    double sum = 0.0;
    double weight = 0.0;
    const long reach = static_cast<long>(std::ceil(half + 0.5));
    for (long k = std::max(0L, i - reach); k <= std::min(n - 1, i + reach); ++k) {
      // Overlap of bin k with [i - half, i + half] in bin units.
      const double lo = std::max(static_cast<double>(k) - 0.5, static_cast<double>(i) - half);
      const double hi = std::min(static_cast<double>(k) + 0.5, static_cast<double>(i) + half);
      const double ov = std::max(0.0, hi - lo);
      sum += ov * h.counts[static_cast<std::size_t>(k)];
      weight += ov;
    }
    out[static_cast<std::size_t>(i)] = weight > 0.0 ? sum / weight : 0.0;
  }
  return out;
}

namespace {

double spectrum(const Histogram& h, double mean, double f) {
  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    acc += (h.counts[i] - mean) * std::polar(1.0, -2.0 * kPi * f * h.centers[i]);
  }
  return std::abs(acc);
}

double dominant_frequency(const Histogram& h) {
  const double w = h.bin_width();
  const double span = w * static_cast<double>(h.counts.size());
  const double mean = h.total() / static_cast<double>(h.counts.size());
  const double df = 1.0 / (16.0 * span);
  const double f_lo = 1.5 / span;
  const double f_hi = 0.5 / w;
  std::vector<double> freq;
  std::vector<double> mag;
  for (double f = f_lo; f <= f_hi; f += df) {
    freq.push_back(f);
    mag.push_back(spectrum(h, mean, f));
  }
  if (freq.size() < 3) throw PreconditionError("histogram too short for a fringe-spacing estimate");

  // Slowly varying envelopes put their weight at low frequency; weighting by f favours fringes.
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t k = 1; k + 1 < freq.size(); ++k) {
    if (mag[k] >= mag[k - 1] && mag[k] >= mag[k + 1] && mag[k] * freq[k] > best_score) {
      best_score = mag[k] * freq[k];
      best = k;
    }
  }
  if (best == 0) best = static_cast<std::size_t>(std::max_element(mag.begin(), mag.end()) - mag.begin());

  // Golden-section refinement of the peak.
  double a = freq[best] - df;
  double b = freq[best] + df;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = spectrum(h, mean, c);
  double fd = spectrum(h, mean, d);
  for (int i = 0; i < 60; ++i) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = spectrum(h, mean, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = spectrum(h, mean, d);
    }
  }
  return 0.5 * (a + b);
}

void normalise(FringeParams& p) {
  if (p.spacing < 0.0) {
    p.spacing = -p.spacing;
    p.phi0 = -p.phi0;
  }
  if (p.envelope_width < 0.0) {
    p.envelope_width = -p.envelope_width;
    p.phi1 = -p.phi1;
  }
  if (p.contrast < 0.0) {
    p.contrast = -p.contrast;
    p.phi0 += kPi;
  }
  p.phi0 = wrap_phase(p.phi0);
}

}  // namespace

double de_broglie(double u) {
  if (!(u > 0.0)) throw DomainError("acceleration voltage must be positive");
  return constants::kPlanck / (momentum_scale() * std::sqrt(u));
}

double acceleration_voltage(double lambda) {
  if (!(lambda > 0.0)) throw DomainError("wavelength must be positive");
  const double r = constants::kPlanck / (momentum_scale() * lambda);
  return r * r;
}

double calibrate_biprism_constant(double s0, double u_sat, double u_bp) {
  if (!(s0 > 0.0) || u_sat == 0.0 || u_bp == 0.0) throw DomainError("biprism calibration needs s0 > 0, U_SAT != 0, U_BP != 0");
  const double theta = de_broglie(std::abs(u_sat)) / (2.0 * s0);
  return theta * std::abs(u_sat) / u_bp;
}

double default_biprism_constant() { return calibrate_biprism_constant(928e-9, -600.0, kDefaultBiprismVoltage); }

double superposition_angle(double gamma, double u_bp, double u_sat) {
  if (u_sat == 0.0) throw DomainError("tip voltage must be non-zero");
  return gamma * u_bp / std::abs(u_sat);
}

BeamParams make_beam(double u_sat, double u_bp, double gamma, double magnification) {
  BeamParams b;
  b.u_sat = u_sat;
  b.kinetic_energy_ev = std::abs(u_sat);
  b.wavelength = de_broglie(std::abs(u_sat));
  b.u_bp = u_bp;
  b.gamma = gamma;
  b.theta = superposition_angle(gamma, u_bp, u_sat);
  b.magnification = magnification;
  const auto fs = fringe_spacing(b);
  b.s0 = fs.s0;
  b.s = fs.s;
  return b;
}

FringeSpacing fringe_spacing(const BeamParams& beam) {
  if (beam.theta == 0.0) throw DomainError("superposition angle is zero: the partial beams do not overlap");
  if (!(beam.magnification > 0.0)) throw DomainError("magnification must be positive");
  if (!(beam.wavelength > 0.0)) throw DomainError("wavelength must be positive");
  FringeSpacing out;
  out.s0 = beam.wavelength / (2.0 * std::abs(beam.theta));
  out.s = beam.magnification * out.s0;
  return out;
}

double magnification_from_measurement(double s_detector, double s0_theory) {
  if (!(s0_theory > 0.0)) throw DomainError("theoretical fringe spacing must be positive");
  if (!(s_detector > 0.0)) throw DomainError("measured fringe spacing must be positive");
  return s_detector / s0_theory;
}

MagnificationTable::MagnificationTable(std::vector<std::pair<double, double>> points) : points_(std::move(points)) {
  if (points_.empty()) throw DomainError("magnification table is empty");
  for (const auto& [u, m] : points_) {
    if (!(u > 0.0) || !(m > 0.0)) throw DomainError("magnification table entries must be positive");
  }
  std::sort(points_.begin(), points_.end());
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (points_[i].first == points_[i - 1].first) throw DomainError("duplicate voltage in magnification table");
  }
}

double MagnificationTable::at(double u_sat) const {
  const double u = std::abs(u_sat);
  if (!(u > 0.0)) throw DomainError("tip voltage must be non-zero");
  if (points_.size() == 1) return points_.front().second;
  auto hi = std::upper_bound(points_.begin(), points_.end(), std::make_pair(u, 0.0));
  if (hi == points_.begin()) ++hi;
  if (hi == points_.end()) --hi;
  const auto lo = hi - 1;
  const double t = std::log(u / lo->first) / std::log(hi->first / lo->first);
  return std::exp(std::log(lo->second) + t * std::log(hi->second / lo->second));
}

MagnificationTable magnification_table_from_spacings(std::span<const std::pair<double, double>> spacings,
                                                     double gamma, double u_bp) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& [u, s] : spacings) {
    const auto beam = make_beam(-std::abs(u), u_bp, gamma, 1.0);
    pts.emplace_back(std::abs(u), magnification_from_measurement(s, beam.s0));
  }
  return MagnificationTable(std::move(pts));
}

MagnificationTable default_magnification_table(double gamma, double u_bp) {
  const std::pair<double, double> anchors[] = {{1560.0, 2.59e-3}, {acceleration_voltage(28.9e-12), 1.89e-3}};
  return magnification_table_from_spacings(anchors, gamma, u_bp);
}

double sinc(double u) {
  if (std::abs(u) < 1e-4) return 1.0 - u * u / 6.0;
  return std::sin(u) / u;
}

double intensity_pattern(const FringeParams& p, double x) {
  const double env = sinc(2.0 * kPi * x / p.envelope_width + p.phi1);
  return p.i0 * (1.0 + p.contrast * std::cos(2.0 * kPi * x / p.spacing + p.phi0)) * env * env;
}

double envelope_center(const FringeParams& p) { return -p.phi1 * p.envelope_width / (2.0 * kPi); }

double Histogram::bin_width() const {
  if (centers.size() < 2) throw PreconditionError("histogram needs at least two bins");
  return (centers.back() - centers.front()) / static_cast<double>(centers.size() - 1);
}

double Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

Histogram make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
  if (bins < 2 || !(hi > lo)) throw PreconditionError("histogram needs bins >= 2 and hi > lo");
  Histogram h;
  const double w = (hi - lo) / static_cast<double>(bins);
  h.centers.resize(bins);
  h.counts.assign(bins, 0.0);
  for (std::size_t i = 0; i < bins; ++i) h.centers[i] = lo + (static_cast<double>(i) + 0.5) * w;
  for (double v : values) {
    if (v < lo || v >= hi) continue;
    const auto k = std::min(bins - 1, static_cast<std::size_t>((v - lo) / w));
    h.counts[k] += 1.0;
  }
  return h;
}

FringeParams initial_fringe_guess(const Histogram& h) {
  if (h.counts.size() < 8 || h.centers.size() != h.counts.size()) {
    throw PreconditionError("fringe fit needs at least 8 bins with matching centres");
  }
  for (double c : h.counts) {
    if (c < 0.0 || !std::isfinite(c)) throw PreconditionError("histogram counts must be finite and non-negative");
  }
  if (!(h.total() > 0.0)) throw PreconditionError("histogram is empty");

  FringeParams p;
  const double f = dominant_frequency(h);
  p.spacing = 1.0 / f;

  const auto env = period_average(h, p.spacing);
  const auto peak = static_cast<std::size_t>(std::max_element(env.begin(), env.end()) - env.begin());
  const double top = env[peak];
  const double w = h.bin_width();
  auto crossing = [&](long step) {
    long k = static_cast<long>(peak);
    while (k + step >= 0 && k + step < static_cast<long>(env.size()) && env[static_cast<std::size_t>(k + step)] > 0.5 * top) {
      k += step;
    }
    const long next = k + step;
    if (next < 0 || next >= static_cast<long>(env.size())) return h.centers[static_cast<std::size_t>(k)] + 0.5 * step * w;
    const double a = env[static_cast<std::size_t>(k)];
    const double b = env[static_cast<std::size_t>(next)];
    const double t = (a - 0.5 * top) / (a - b);
    return h.centers[static_cast<std::size_t>(k)] + t * step * w;
  };
  const double left = crossing(-1);
  const double right = crossing(+1);
  const double fwhm = std::max(right - left, 2.0 * w);
  const double centre = 0.5 * (left + right);
  p.envelope_width = kPi * fwhm / sinc2_half_width(0.5);
  p.phi1 = -2.0 * kPi * centre / p.envelope_width;
  p.i0 = top;

  // Contrast from the extremes within one period around the envelope centre.
  double vmax = 0.0;
  double vmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    if (std::abs(h.centers[i] - centre) <= 0.5 * p.spacing + 0.5 * w) {
      vmax = std::max(vmax, h.counts[i]);
      vmin = std::min(vmin, h.counts[i]);
    }
  }
  p.contrast = vmax + vmin > 0.0 ? std::clamp((vmax - vmin) / (vmax + vmin), 0.01, 0.99) : 0.1;

  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    acc += (h.counts[i] - env[i]) * std::polar(1.0, -2.0 * kPi * h.centers[i] / p.spacing);
  }
  p.phi0 = std::arg(acc);
  return p;
}

FringeFit fit_fringes(const Histogram& h) {
  const FringeParams guess = initial_fringe_guess(h);
  const std::vector<double> p0 = {guess.i0, guess.contrast, guess.spacing, guess.phi0, guess.envelope_width, guess.phi1};
  auto unpack = [](std::span<const double> q) {
    return FringeParams{q[0], q[1], q[2], q[3], q[4], q[5]};
  };
  const ResidualFunction residuals = [&](std::span<const double> q, std::span<double> r) {
    const FringeParams p = unpack(q);
    for (std::size_t i = 0; i < h.counts.size(); ++i) r[i] = intensity_pattern(p, h.centers[i]) - h.counts[i];
  };
  const auto lsq = levenberg_marquardt(residuals, h.counts.size(), p0);

  FringeFit fit;
  fit.params = unpack(lsq.params);
  normalise(fit.params);
  fit.sigma = unpack(lsq.sigma);
  fit.chi2 = lsq.chi2;
  fit.dof = lsq.dof;
  if (fit.params.contrast > 1.0) {
    fit.params.contrast = 1.0;
    fit.contrast_pinned = true;
  }
  if (!(fit.params.spacing > 0.0) || !(fit.params.envelope_width > 0.0) || !(fit.params.i0 > 0.0)) {
    throw FitError("fringe fit converged to a degenerate pattern", lsq.chi2);
  }
  return fit;
}

int count_fringes(const FringeParams& p, double threshold) {
  if (!(threshold > 0.0) || !(threshold < 1.0)) throw DomainError("threshold must lie in (0, 1)");
  if (!(p.spacing > 0.0) || !(p.envelope_width > 0.0)) throw DomainError("spacing and envelope width must be positive");
  const double width = sinc2_half_width(threshold) * p.envelope_width / kPi;
  return static_cast<int>(std::lround(width / p.spacing));
}

}  // namespace cohsrc
