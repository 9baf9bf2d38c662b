#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cohsrc/beam_optics.hpp"

namespace cohsrc {

struct Event {
  double t = 0.0;  // s
  double x = 0.0;  // m, across the fringes
  double y = 0.0;  // m, along the fringes
};

struct DetectorWindow {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;

  bool contains(double x, double y) const noexcept { return x >= x_min && x < x_max && y >= y_min && y < y_max; }
};

/// Envelope centre +- s1 in x (the main lobe and both first side lobes) and +- s1 / 2 in y.
DetectorWindow default_window(const FringeParams& pattern);

struct EventList {
  std::vector<Event> events;  // time ordered
  double duration = 0.0;      // s
  double rate = 0.0;          // requested mean rate, Hz
  std::uint64_t seed = 0;
  DetectorWindow window;

  double mean_rate() const noexcept {
    return duration > 0.0 ? static_cast<double>(events.size()) / duration : 0.0;
  }
};

/// Fringe phase phi0 + amplitude * sin(2 pi frequency t + phase).
struct DephasingModel {
  double amplitude = 0.0;    // rad
  double frequency = 50.0;   // Hz
  double phase = 0.0;        // rad
};

/// Poisson arrival times at `rate` over [0, duration); x drawn from I(x) with the dephased
/// fringe phase at each arrival time, y uniform. Deterministic per seed.
EventList generate_events(const FringeParams& pattern, const DephasingModel& dephasing, double rate,
                          double duration, std::uint64_t seed);
EventList generate_events(const FringeParams& pattern, const DephasingModel& dephasing, double rate,
                          double duration, std::uint64_t seed, const DetectorWindow& window);

/// Histogram of the x coordinates over the detector window.
Histogram histogram_x(const EventList& events, std::size_t bins);

/// Time-integrated fringe fit of the x histogram; the contrast is corrected for the averaging
/// of the fringes over one bin.
FringeFit histogram_contrast(const EventList& events, std::size_t bins);

struct G2Options {
  double u_range_periods = 2.0;    // |u| <= this * s
  double tau_periods = 3.0;        // tau <= this / nu
  int tau_bins_per_period = 24;
  int u_bins_per_period = 16;
  std::size_t min_events = 10000;
  int amplitude_grid = 200;        // profile grid over A in [0, pi]
  double sigma_threshold = 0.05;   // sigma_C above this sets low_statistics
  double max_reduced_chi2 = 10.0;  // best frequency above this raises FrequencySearchError
};

struct G2Slice {
  double tau_lo = 0.0;  // s
  double tau_hi = 0.0;
  double k = 0.0;       // cos(2 pi u / s) amplitude relative to the uncorrelated pairs
  double k_sigma = 0.0;
  double pairs = 0.0;
};

struct G2FrequencyScore {
  double frequency = 0.0;
  double reduced_chi2 = 0.0;
};

struct G2Result {
  double c_corrected = 0.0;
  double c_sigma = 0.0;
  double amplitude = 0.0;  // rad
  double amplitude_sigma = 0.0;
  double frequency = 0.0;  // Hz, best grid point
  double reduced_chi2 = 0.0;
  bool low_statistics = false;
  std::vector<G2Slice> slices;
  std::vector<G2FrequencyScore> scores;
};

/// Pair correlation over spatial (u) and temporal (tau) event differences. Each tau slice gives
/// the fringe-period amplitude K(tau) of the pair histogram relative to the singles
/// autocorrelation; (C^2 / 2) J0(2 A |sin(pi nu tau)|) is fitted to K(tau) for every candidate
/// frequency. PreconditionError below `min_events`; FrequencySearchError when no candidate fits.
G2Result g2_contrast(const EventList& events, double spacing, std::span<const double> frequencies,
                     const G2Options& options = {});

}  // namespace cohsrc
