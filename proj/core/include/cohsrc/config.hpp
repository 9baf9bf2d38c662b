#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cohsrc/beam_optics.hpp"
#include "cohsrc/emission.hpp"
#include "cohsrc/errors.hpp"
#include "cohsrc/events_correlation.hpp"
#include "cohsrc/geometry_fields.hpp"
#include "cohsrc/trajectories.hpp"
#include "cohsrc/wien_coherence.hpp"

namespace cohsrc {

struct BeamConfig {
  double u_bp = kDefaultBiprismVoltage;  // V
  double gamma = 0.0;                    // rad; 0 selects the 928 nm calibration
  double magnification = 0.0;            // 0 selects the empirical table
  double wavelength = 0.0;               // m; 0 computes it from U_SAT
};

struct FringeConfig {
  double contrast = 0.535;
  double spacing = 0.0;            // m; 0 takes s from the beam model
  double envelope_periods = 12.0;  // s1 / s
  double phi0 = 0.3;
  double phi1 = 0.0;
  int bins_per_period = 10;
  double count_threshold = 0.1;
};

struct EventsConfig {
  double rate = 1000.0;   // Hz
  long count = 300000;    // expected events; duration = count / rate
  std::uint64_t seed = 1;
};

struct DephasingConfig {
  double amplitude_pi = 0.4;  // A / pi
  double frequency = 50.0;    // Hz
  double phase = 0.0;         // rad
  double grid_min = 40.0;     // candidate frequencies for the g2 search, Hz
  double grid_max = 60.0;
  double grid_step = 1.0;
};

struct SweepConfig {
  std::string parameter;       // any config key; empty = single step
  std::vector<double> values;  // explicit values, or filled from start/stop/steps
  double start = 0.0;
  double stop = 0.0;
  int steps = 1;
};

struct TraceConfig {
  TraceOptions options;
  LaunchFan fan;                        // polar angles in radians
  std::vector<double> fan_angles_deg;   // empty = apex launch only
};

/// Every tunable of the toolkit. Keys are `<section>_<field>` in SI units.
struct ToolkitConfig {
  GeometryConfig geometry;
  ElectrodeVoltages voltages;
  double solver_tolerance = 0.0;
  long solver_max_iterations = 200000;
  TraceConfig trace;
  FNParams emission = default_fn_params();
  BeamConfig beam;
  FringeConfig fringe;
  EventsConfig events;
  DephasingConfig dephasing;
  WienConfig wien;
  WienSweepSpec wien_sweep;
  SweepConfig sweep;
};

/// Raised for a line that is not `key = value`, or an unreadable file.
class ConfigParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct ParsedConfig {
  ToolkitConfig config;
  std::vector<Violation> violations;  // unknown keys, malformed values, invariant violations
};

/// Parses `key = value` lines ('#' starts a comment) on top of the defaults, then validates.
ParsedConfig parse_config(const std::string& text);
ParsedConfig load_config(const std::filesystem::path& path);

/// Sets one key; returns a violation message or an empty string.
std::string apply_setting(ToolkitConfig& config, const std::string& key, const std::string& value);

/// Current value of a key rendered as text. ValidationError for unknown keys.
std::string get_setting(const ToolkitConfig& config, const std::string& key);

/// All recognised keys in documentation order.
std::vector<std::string> config_keys();

/// Invariant violations of a fully assembled config.
std::vector<Violation> validate_config(const ToolkitConfig& config);

/// Full config as `key = value` text that parse_config reads back unchanged.
std::string render_config(const ToolkitConfig& config);

/// Sweep values: the explicit list, else start/stop/steps; empty when no parameter is set.
std::vector<double> sweep_values(const SweepConfig& sweep);

// Derived quantities shared by the CLI and the scenarios.
double biprism_constant(const ToolkitConfig& config);
BeamParams beam_for(const ToolkitConfig& config);
FringeParams pattern_for(const ToolkitConfig& config, const BeamParams& beam);
DephasingModel dephasing_for(const ToolkitConfig& config);
std::vector<double> frequency_grid(const ToolkitConfig& config);
double events_duration(const ToolkitConfig& config);

}  // namespace cohsrc
