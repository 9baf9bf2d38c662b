#include "cohsrc/events_correlation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "cohsrc/errors.hpp"
#include "cohsrc/least_squares.hpp"
#include "cohsrc/physics_constants.hpp"

namespace cohsrc {

namespace {

using constants::kPi;

constexpr int kTauSubsamples = 8;
constexpr double kMinSlicePairs = 50.0;

void check_pattern(const FringeParams& p) {
  if (!(p.i0 > 0.0)) throw DomainError("pattern intensity must be positive");
  if (!(p.spacing > 0.0) || !(p.envelope_width > 0.0)) throw DomainError("pattern spacing and envelope width must be positive");
  if (p.contrast < 0.0 || p.contrast > 1.0) throw DomainError("pattern contrast must lie in [0, 1]");
}

// K(tau) model averaged over the tau bin.
double bin_model(double amplitude, double nu, double tau_lo, double tau_hi) {
  double sum = 0.0;
  const double dt = (tau_hi - tau_lo) / kTauSubsamples;
  for (int l = 0; l < kTauSubsamples; ++l) {
    const double tau = tau_lo + (l + 0.5) * dt;
    sum += std::cyl_bessel_j(0.0, 2.0 * std::abs(amplitude * std::sin(kPi * nu * tau)));
  }
  return sum / kTauSubsamples;
}

struct SliceModel {
  std::vector<const G2Slice*> slices;
  double nu = 0.0;
};

// chi2 of the best q at every amplitude on the grid; returns (q, A, chi2) of the minimum.
struct ProfileResult {
  double q = 0.0;
  double amplitude = 0.0;
  double chi2 = std::numeric_limits<double>::infinity();
};

ProfileResult profile_amplitude(const SliceModel& m, int grid) {
  ProfileResult best;
  std::vector<double> model(m.slices.size());
  for (int g = 0; g <= grid; ++g) {
    const double a = kPi * g / grid;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < m.slices.size(); ++i) {
      const auto* s = m.slices[i];
      model[i] = bin_model(a, m.nu, s->tau_lo, s->tau_hi);
      const double w = 1.0 / (s->k_sigma * s->k_sigma);
      num += w * s->k * model[i];
      den += w * model[i] * model[i];
    }
    const double q = den > 0.0 ? num / den : 0.0;
    double chi2 = 0.0;
    for (std::size_t i = 0; i < m.slices.size(); ++i) {
      const double d = (m.slices[i]->k - q * model[i]) / m.slices[i]->k_sigma;
      chi2 += d * d;
    }
    if (chi2 < best.chi2) best = {q, a, chi2};
  }
  return best;
}

}  // namespace

DetectorWindow default_window(const FringeParams& pattern) {
  check_pattern(pattern);
  const double c = envelope_center(pattern);
  const double s1 = pattern.envelope_width;
  return {c - s1, c + s1, -0.5 * s1, 0.5 * s1};
}

EventList generate_events(const FringeParams& pattern, const DephasingModel& dephasing, double rate,
                          double duration, std::uint64_t seed) {
  return generate_events(pattern, dephasing, rate, duration, seed, default_window(pattern));
}

EventList generate_events(const FringeParams& pattern, const DephasingModel& dephasing, double rate,
                          double duration, std::uint64_t seed, const DetectorWindow& window) {
  check_pattern(pattern);
  if (!(rate > 0.0)) throw DomainError("event rate must be positive");
  if (!(duration > 0.0)) throw DomainError("duration must be positive");
  if (dephasing.amplitude < 0.0) throw DomainError("dephasing amplitude must be non-negative");
  if (!(dephasing.frequency > 0.0)) throw DomainError("dephasing frequency must be positive");
  if (!(window.x_max > window.x_min) || !(window.y_max > window.y_min)) throw DomainError("detector window is empty");

  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(rate);
  std::uniform_real_distribution<double> ux(window.x_min, window.x_max);
  std::uniform_real_distribution<double> uy(window.y_min, window.y_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double bound = pattern.i0 * (1.0 + pattern.contrast);

  EventList out;
  out.duration = duration;
  out.rate = rate;
  out.seed = seed;
  out.window = window;
  out.events.reserve(static_cast<std::size_t>(rate * duration * 1.01 + 16.0));
  FringeParams p = pattern;
  double t = 0.0;
  while (true) {
    t += gap(rng);
    if (t >= duration) break;
    p.phi0 = pattern.phi0 + dephasing.amplitude * std::sin(2.0 * kPi * dephasing.frequency * t + dephasing.phase);
    double x = 0.0;
    do {
      x = ux(rng);
    } while (unit(rng) * bound > intensity_pattern(p, x));
    out.events.push_back({t, x, uy(rng)});
  }
  return out;
}

Histogram histogram_x(const EventList& events, std::size_t bins) {
  std::vector<double> xs;
  xs.reserve(events.events.size());
  for (const auto& e : events.events) xs.push_back(e.x);
  return make_histogram(xs, events.window.x_min, events.window.x_max, bins);
}

FringeFit histogram_contrast(const EventList& events, std::size_t bins) {
  const Histogram h = histogram_x(events, bins);
  FringeFit fit = fit_fringes(h);
  // Counting over a finite bin averages cos(2 pi x / s) down by sinc(pi w / s).
  const double shrink = sinc(kPi * h.bin_width() / fit.params.spacing);
  fit.params.contrast = std::min(1.0, fit.params.contrast / shrink);
  fit.sigma.contrast /= shrink;
  return fit;
}

G2Result g2_contrast(const EventList& events, double spacing, std::span<const double> frequencies,
                     const G2Options& options) {
  if (events.events.size() < options.min_events) {
    throw PreconditionError("g2 analysis needs at least " + std::to_string(options.min_events) + " events");
  }
  if (!(spacing > 0.0)) throw DomainError("fringe spacing must be positive");
  if (frequencies.empty()) throw PreconditionError("frequency grid is empty");
  for (double f : frequencies) {
    if (!(f > 0.0)) throw DomainError("candidate frequencies must be positive");
  }
  const double nu_min = *std::min_element(frequencies.begin(), frequencies.end());
  const double nu_max = *std::max_element(frequencies.begin(), frequencies.end());

  // Singles envelope with the fringes averaged out, and its folded autocorrelation.
  const double w = spacing / options.u_bins_per_period;
  const double width = events.window.x_max - events.window.x_min;
  const auto nbins = static_cast<std::size_t>(std::ceil(width / w));
  std::vector<double> xs;
  xs.reserve(events.events.size());
  for (const auto& e : events.events) xs.push_back(e.x);
  const Histogram singles = make_histogram(xs, events.window.x_min, events.window.x_min + w * static_cast<double>(nbins), nbins);
  const auto envelope = period_average(singles, spacing);
  const auto nu = static_cast<std::size_t>(std::lround(options.u_range_periods * options.u_bins_per_period));
  std::vector<double> autocorr(nu + 1, 0.0);
  for (std::size_t k = 0; k <= nu; ++k) {
    for (std::size_t i = 0; i + k < nbins; ++i) autocorr[k] += envelope[i] * envelope[i + k];
    if (k > 0) autocorr[k] *= 2.0;
  }

  // Pair histogram over (tau, |u|), folded in u.
  const double dtau = 1.0 / (options.tau_bins_per_period * nu_max);
  const double tau_max = options.tau_periods / nu_min;
  const auto ntau = static_cast<std::size_t>(std::ceil(tau_max / dtau));
  std::vector<double> pairs(ntau * (nu + 1), 0.0);
  std::vector<std::pair<double, double>> tx;
  tx.reserve(events.events.size());
  for (const auto& e : events.events) tx.emplace_back(e.t, e.x);
  std::sort(tx.begin(), tx.end());
  const double u_lim = (static_cast<double>(nu) + 0.5) * w;
  for (std::size_t i = 0; i < tx.size(); ++i) {
    for (std::size_t j = i + 1; j < tx.size(); ++j) {
      const double tau = tx[j].first - tx[i].first;
      if (tau >= tau_max) break;
      const double u = std::abs(tx[j].second - tx[i].second);
      if (u >= u_lim) continue;
      const auto it = static_cast<std::size_t>(tau / dtau);
      if (it >= ntau) continue;
      pairs[it * (nu + 1) + static_cast<std::size_t>(std::lround(u / w))] += 1.0;
    }
  }

  // Per-slice amplitude of cos(2 pi u / s) relative to the uncorrelated baseline.
  const double bin_correction = sinc(kPi * w / spacing);
  G2Result result;
  std::vector<double> design(2 * (nu + 1));
  std::vector<double> weights(nu + 1);
  for (std::size_t k = 0; k <= nu; ++k) {
    design[2 * k] = autocorr[k];
    design[2 * k + 1] = autocorr[k] * std::cos(2.0 * kPi * static_cast<double>(k) * w / spacing);
  }
  for (std::size_t it = 0; it < ntau; ++it) {
    const std::span<const double> h(pairs.data() + it * (nu + 1), nu + 1);
    double total = 0.0;
    for (std::size_t k = 0; k <= nu; ++k) {
      total += h[k];
      weights[k] = 1.0 / std::max(h[k], 1.0);
    }
    G2Slice slice;
    slice.tau_lo = static_cast<double>(it) * dtau;
    slice.tau_hi = slice.tau_lo + dtau;
    slice.pairs = total;
    if (total >= kMinSlicePairs) {
      const auto fit = linear_least_squares(design, h, weights, 2);
      const double a = fit.coefficients[0];
      const double b = fit.coefficients[1];
      const double vaa = fit.covariance[0];
      const double vab = fit.covariance[1];
      const double vbb = fit.covariance[3];
      slice.k = b / a / bin_correction;
      const double var = vbb / (a * a) + (b * b) / (a * a * a * a) * vaa - 2.0 * b / (a * a * a) * vab;
      slice.k_sigma = std::sqrt(std::max(var, 0.0)) / bin_correction;
    }
    result.slices.push_back(slice);
  }

  // Profile the amplitude on a grid for every candidate frequency, then refine the best.
  double best_chi2r = std::numeric_limits<double>::infinity();
  SliceModel best_model;
  ProfileResult best_profile;
  for (double f : frequencies) {
    SliceModel model;
    model.nu = f;
    for (const auto& s : result.slices) {
      if (s.k_sigma > 0.0 && s.tau_hi <= options.tau_periods / f + 1e-12 * dtau) model.slices.push_back(&s);
    }
    if (model.slices.size() < 4) continue;
    const auto profile = profile_amplitude(model, options.amplitude_grid);
    const double chi2r = profile.chi2 / static_cast<double>(model.slices.size() - 2);
    result.scores.push_back({f, chi2r});
    if (chi2r < best_chi2r) {
      best_chi2r = chi2r;
      best_model = model;
      best_profile = profile;
    }
  }
  if (best_model.slices.empty()) throw PreconditionError("too few populated tau slices for the g2 fit");

  const auto& m = best_model;
  const ResidualFunction residuals = [&](std::span<const double> q, std::span<double> r) {
    for (std::size_t i = 0; i < m.slices.size(); ++i) {
      const auto* s = m.slices[i];
      r[i] = (s->k - q[0] * bin_model(q[1], m.nu, s->tau_lo, s->tau_hi)) / s->k_sigma;
    }
  };
  const auto lsq = levenberg_marquardt(residuals, m.slices.size(), {best_profile.q, std::max(best_profile.amplitude, 1e-3)});
  const double q = lsq.params[0];
  result.frequency = m.nu;
  result.reduced_chi2 = lsq.reduced_chi2();
  result.amplitude = std::abs(lsq.params[1]);
  result.amplitude_sigma = lsq.sigma[1];
  result.c_corrected = q > 0.0 ? std::sqrt(2.0 * q) : 0.0;
  result.c_sigma = result.c_corrected > 0.0 ? lsq.sigma[0] / result.c_corrected : std::sqrt(2.0 * lsq.sigma[0]);
  result.low_statistics = result.c_sigma > options.sigma_threshold;
  if (result.reduced_chi2 > options.max_reduced_chi2) {
    throw FrequencySearchError("no candidate dephasing frequency explains the correlation signal (reduced chi2 " +
                               std::to_string(result.reduced_chi2) + ")");
  }
  return result;
}

}  // namespace cohsrc
