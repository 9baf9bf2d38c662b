#include "cohsrc/trajectories.hpp"

#include <algorithm>
#include <cmath>

#include "cohsrc/errors.hpp"
#include "cohsrc/physics_constants.hpp"

namespace cohsrc {

namespace {

using constants::kElectronMass;
using constants::kElementaryCharge;

constexpr double kChargeOverMass = -kElementaryCharge / kElectronMass;
constexpr double kMinStep = 1e-24;  // s

Vec2 acceleration(const PotentialGrid& grid, Vec2 p) { return kChargeOverMass * grid.field(p); }

double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.r * b.r; }

enum class Where { kVacuum, kElectrode, kOutside };

Where classify(const PotentialGrid& grid, Vec2 p) {
  if (!grid.in_domain(p)) return Where::kOutside;
  return grid.electrode_at(p) ? Where::kElectrode : Where::kVacuum;
}

// Electrode owning the boundary node nearest to a point that left the domain, if any.
ElectrodeId wall_at(const PotentialGrid& grid, Vec2 p) {
  const auto& layout = grid.layout();
  const double h = layout.spacing();
  const double x = std::clamp(p.x, 0.0, layout.length());
  const double r = std::clamp(std::abs(p.r), 0.0, layout.radius());
  const auto i = static_cast<std::size_t>(std::lround(x / h));
  const auto j = static_cast<std::size_t>(std::lround(r / h));
  return layout.at(std::min(i, layout.nx() - 1), std::min(j, layout.nr() - 1));
}

}  // namespace

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kTransmitted:
      return "transmitted";
    case Termination::kHitElectrode:
      return "hit";
    case Termination::kExited:
      return "exited";
    case Termination::kStepLimit:
      return "step_limit";
  }
  return "unknown";
}

double kinetic_energy_ev(Vec2 velocity) {
  return 0.5 * kElectronMass * dot(velocity, velocity) / kElementaryCharge;
}

double electron_speed(double ev) {
  if (ev < 0.0) throw DomainError("kinetic energy must be non-negative");
  return std::sqrt(2.0 * kElementaryCharge * ev / kElectronMass);
}

double total_energy_ev(const PotentialGrid& grid, const ParticleState& state) {
  return kinetic_energy_ev(state.velocity) - grid.potential(state.position);
}

Trajectory integrate_trajectory(const PotentialGrid& grid, const ParticleState& start,
                                const TraceOptions& options) {
  if (!(options.dt_max > 0.0)) throw PreconditionError("dt_max must be positive");
  if (options.step_limit < 1) throw PreconditionError("step_limit must be at least 1");
  if (!grid.in_domain(start.position)) throw PreconditionError("start point lies outside the domain");
  if (grid.electrode_at(start.position)) throw PreconditionError("start point lies inside an electrode");

  const double h = grid.layout().spacing();
  const double cell = options.cell_fraction * h;
  const long store_every = std::max(1L, options.store_every);

  Trajectory traj;
  traj.total_energy_ev = total_energy_ev(grid, start);
  const double energy_ref = std::abs(traj.total_energy_ev) > 0.0
                                ? std::abs(traj.total_energy_ev)
                                : std::max(grid.max_abs_voltage(), 1.0);
  const double step_tol = options.step_energy_tolerance * energy_ref;

  ParticleState s = start;
  Vec2 a = acceleration(grid, s.position);
  double energy_prev = traj.total_energy_ev;
  double dt_prev = options.dt_max;
  traj.states.push_back(s);

  auto finish = [&](Termination why) {
    if (traj.states.back().t != s.t) traj.states.push_back(s);
    traj.termination = why;
    return std::move(traj);
  };

  for (long step = 0; step < options.step_limit; ++step) {
    const double speed = norm(s.velocity);
    const double amag = norm(a);
    double dt = std::min(options.dt_max, 2.0 * dt_prev);
    if (speed > 0.0) dt = std::min(dt, cell / speed);
    if (amag > 0.0) dt = std::min(dt, std::sqrt(2.0 * cell / amag));

    while (true) {
      const Vec2 v_half = s.velocity + (0.5 * dt) * a;
      const Vec2 p_new = s.position + dt * v_half;
      const Where where = classify(grid, p_new);

      if (where != Where::kVacuum) {
        // Shrink the step until the drift end point is within h/100 of the boundary.
        double lo = 0.0;
        double hi = dt;
        auto drift_to = [&](double tau) { return s.position + tau * (s.velocity + (0.5 * tau) * a); };
        while (norm(drift_to(hi) - drift_to(lo)) > h / 100.0) {
          const double mid = 0.5 * (lo + hi);
          if (classify(grid, drift_to(mid)) == Where::kVacuum) {
            lo = mid;
          } else {
            hi = mid;
          }
        }
        const Vec2 inside = drift_to(hi);
        if (lo > 0.0) {
          const Vec2 vh = s.velocity + (0.5 * lo) * a;
          s.position = s.position + lo * vh;
          a = acceleration(grid, s.position);
          s.velocity = vh + (0.5 * lo) * a;
          s.t += lo;
        }
        // A masked domain face is an electrode wall, not an open exit.
        traj.hit_electrode = grid.in_domain(inside) ? grid.electrode_at(inside).value_or(kVacuum)
                                                    : wall_at(grid, inside);
        if (traj.hit_electrode == kVacuum) return finish(Termination::kExited);
        traj.impact_point = inside;
        return finish(Termination::kHitElectrode);
      }

      const Vec2 a_new = acceleration(grid, p_new);
      const Vec2 v_new = v_half + (0.5 * dt) * a_new;
      const double energy_new = kinetic_energy_ev(v_new) - grid.potential(p_new);
      if (std::abs(energy_new - energy_prev) > step_tol && dt > kMinStep) {
        dt *= 0.5;
        continue;
      }
      s.position = p_new;
      s.velocity = v_new;
      s.t += dt;
      a = a_new;
      energy_prev = energy_new;
      dt_prev = dt;
      break;
    }

    if (kinetic_energy_ev(s.velocity) > constants::kNonRelativisticLimitEv) traj.relativistic_flag = true;
    if (options.transmit_x > 0.0 && s.position.x >= options.transmit_x) {
      return finish(Termination::kTransmitted);
    }
    if ((step + 1) % store_every == 0) traj.states.push_back(s);
  }
  return finish(Termination::kStepLimit);
}

double terminal_energy(const Trajectory& trajectory, const PotentialGrid& grid) {
  (void)grid;
  if (trajectory.termination != Termination::kTransmitted) {
    throw StateError("terminal energy is undefined for a trajectory that was not transmitted (" +
                     to_string(trajectory.termination) + ")");
  }
  return kinetic_energy_ev(trajectory.states.back().velocity);
}

double max_relative_energy_error(const Trajectory& trajectory, const PotentialGrid& grid) {
  const double e0 = trajectory.total_energy_ev;
  const double ref = std::abs(e0) > 0.0 ? std::abs(e0) : 1.0;
  double worst = 0.0;
  for (const auto& s : trajectory.states) {
    worst = std::max(worst, std::abs(total_energy_ev(grid, s) - e0) / ref);
  }
  return worst;
}

std::vector<ParticleState> make_fan(const Geometry& geometry, const LaunchFan& fan) {
  if (!(fan.launch_distance > 0.0)) throw PreconditionError("launch distance must be positive");
  const double speed = electron_speed(fan.initial_energy_ev);
  const Vec2 apex{geometry.apex_node_x(), 0.0};
  std::vector<ParticleState> out;
  out.reserve(fan.polar_angles_rad.size());
  for (double angle : fan.polar_angles_rad) {
    const Vec2 dir{std::cos(angle), std::sin(angle)};
    out.push_back({0.0, apex + fan.launch_distance * dir, speed * dir});
  }
  return out;
}

std::string outcome_label(const Trajectory& trajectory, const ElectrodeLayout& layout) {
  if (trajectory.termination == Termination::kHitElectrode) {
    return "hit:" + layout.electrode_name(trajectory.hit_electrode);
  }
  return to_string(trajectory.termination);
}

BundleResult classify_bundle(const PotentialGrid& grid, std::span<const ParticleState> starts,
                             const TraceOptions& options) {
  if (starts.empty()) throw PreconditionError("classify_bundle needs at least one start state");
  BundleResult result;
  result.trajectories.reserve(starts.size());
  for (const auto& start : starts) {
    result.trajectories.push_back(integrate_trajectory(grid, start, options));
    ++result.histogram[outcome_label(result.trajectories.back(), grid.layout())];
  }
  return result;
}

}  // namespace cohsrc
