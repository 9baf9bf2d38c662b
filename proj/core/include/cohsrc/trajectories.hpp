#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cohsrc/geometry_fields.hpp"

namespace cohsrc {

/// Electron state in the meridional plane; r is signed (see Vec2).
struct ParticleState {
  double t = 0.0;  // s
  Vec2 position;   // m
  Vec2 velocity;   // m/s
};

enum class Termination { kTransmitted, kHitElectrode, kExited, kStepLimit };

std::string to_string(Termination t);

struct Trajectory {
  std::vector<ParticleState> states;
  Termination termination = Termination::kStepLimit;
  ElectrodeId hit_electrode = kVacuum;  // set when termination == kHitElectrode
  std::optional<Vec2> impact_point;     // first point found inside the electrode
  double total_energy_ev = 0.0;         // KE - e*phi at launch
  bool relativistic_flag = false;       // some state exceeded the non-relativistic limit
};

double kinetic_energy_ev(Vec2 velocity);
/// Speed of a non-relativistic electron with kinetic energy `ev` (eV).
double electron_speed(double ev);

/// KE - e*phi in eV for `state` on `grid`.
double total_energy_ev(const PotentialGrid& grid, const ParticleState& state);

struct TraceOptions {
  double dt_max = 1.0e-11;       // s
  long step_limit = 2'000'000;
  /// Trajectories crossing this plane in vacuum count as transmitted (<= 0: never).
  double transmit_x = 0.0;
  /// Fraction of a cell an electron may travel per step.
  double cell_fraction = 0.1;
  /// Allowed change of KE - e*phi in one step, relative to the launch total energy.
  double step_energy_tolerance = 1.0e-10;
  /// Store every n-th accepted step (the final state is always stored).
  long store_every = 1;
};

/// Kick-drift-kick leapfrog through `grid` with adaptive dt. Throws PreconditionError if
/// `start` is outside the domain or inside an electrode.
Trajectory integrate_trajectory(const PotentialGrid& grid, const ParticleState& start,
                                const TraceOptions& options);

/// Kinetic energy (eV) at the last state of a transmitted trajectory; StateError otherwise.
double terminal_energy(const Trajectory& trajectory, const PotentialGrid& grid);

/// Largest |KE - e*phi - E_total| / |E_total| over the stored states.
double max_relative_energy_error(const Trajectory& trajectory, const PotentialGrid& grid);

/// Launch fan: electrons leave points at `launch_distance` from the apex node along polar
/// angles measured from the optical axis, with kinetic energy `initial_energy_ev` along
/// the same direction.
struct LaunchFan {
  double launch_distance = 50.0e-6;
  std::vector<double> polar_angles_rad;
  double initial_energy_ev = 0.0;
};

std::vector<ParticleState> make_fan(const Geometry& geometry, const LaunchFan& fan);

/// Outcome label: "transmitted", "exited", "step_limit" or "hit:<electrode name>".
std::string outcome_label(const Trajectory& trajectory, const ElectrodeLayout& layout);

struct BundleResult {
  std::map<std::string, long> histogram;
  std::vector<Trajectory> trajectories;  // same order as the starts
};

/// Integrates every start (independently) and histograms the outcomes. Throws
/// PreconditionError for an empty start list.
BundleResult classify_bundle(const PotentialGrid& grid, std::span<const ParticleState> starts,
                             const TraceOptions& options);

}  // namespace cohsrc
