#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cohsrc/config.hpp"

namespace cohsrc {

inline constexpr int kReportSchemaVersion = 1;

/// Toolkit version string baked in at build time.
std::string toolkit_version();

/// Pipeline stages executed in order at every step.
enum class Stage {
  kField,     // Laplace solve and apex trace from rest
  kFan,       // launch fan around the apex (needs kField)
  kEmission,  // FN rate, beam optics and fringe count
  kEvents,    // event generation, CSV round trip, histogram fit and g2 correction
  kWien,      // synthetic Wien-filter sweep and coherence analysis
};

std::string to_string(Stage stage);

struct Setting {
  std::string key;
  std::string value;
};

struct StepSpec {
  std::string label;
  std::vector<Setting> settings;
};

/// Post-run summaries. Each adds derived quantities and, where the model makes a definite
/// prediction, a pass/fail check.
enum class Summary {
  kTerminalEnergy,      // |KE_terminal - e|U_SAT|| <= 0.1 eV at every step
  kEnergyConservation,  // max relative energy error < 1e-6 over every stored state
  kCounterHits,         // at least one fan trajectory ends on the counter electrode
  kRateRatio,           // last / first detector rate
  kRateRatio33,         // same, checked against 33 +- 1
  kFnCalibration,       // FN fit through the step rates; collinearity < 1e-10
  kSpacingConstant,     // s identical across steps
  kSpacingDecreasing,   // s strictly decreasing with |U_SAT|
  kFringeCountConstant, // fringe count identical across steps
  kContrastRecovery,    // g2 contrast within 0.03 and amplitude within 0.05 pi of the planted values
  kCoherenceConsistent, // every pair of l_c estimates agrees within the fit errors
};

std::string to_string(Summary summary);

struct Scenario {
  std::string name;
  std::string description;
  std::vector<Stage> pipeline;
  std::vector<Setting> settings;  // applied over the base config
  std::vector<StepSpec> steps;    // explicit steps; empty uses the config sweep, or one step
  std::vector<Summary> summaries;
  bool field_basis = false;       // superpose unit solutions instead of solving every step
};

struct StepError {
  std::string kind;
  std::string message;
};

struct StepRecord {
  std::size_t index = 0;
  std::string label;
  std::vector<Setting> settings;
  std::uint64_t seed = 0;
  std::map<std::string, double> outputs;      // SI values, unit-suffixed names
  std::map<std::string, std::string> labels;  // categorical outputs
  std::vector<std::string> files;             // relative to the scenario output directory
  std::optional<StepError> error;
};

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  std::string detail;
};

struct RunReport {
  int schema_version = kReportSchemaVersion;
  std::string toolkit_version;
  std::string scenario;
  std::string description;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  std::map<std::string, double> derived;
  std::vector<Check> checks;
  std::vector<std::string> files;
  bool aborted = false;  // fail-fast stopped the sweep

  /// No step failed and every check passed.
  bool ok() const;
  std::string to_json() const;
};

struct RunOptions {
  ToolkitConfig base;
  std::optional<std::uint64_t> seed;  // overrides events_seed; step i uses seed + i
  std::filesystem::path out_dir = "out";
  bool fail_fast = false;
};

const std::vector<Scenario>& builtin_scenarios();
std::vector<std::string> list_scenarios();
/// ValidationError for an unknown name.
const Scenario& find_scenario(const std::string& name);

/// Config of every step after the scenario and step settings are applied.
std::vector<ToolkitConfig> scenario_step_configs(const Scenario& scenario, const ToolkitConfig& base);
/// Violations of every step config, keys prefixed with the step label.
std::vector<Violation> validate_scenario(const Scenario& scenario, const ToolkitConfig& base);

/// Runs every step, writing `<out_dir>/<name>/step_NN_*` files and `report.json`.
/// ValidationError when the scenario does not validate.
RunReport run_scenario(const Scenario& scenario, const RunOptions& options);

/// Fits shared by the events stage and the `fringes` / `g2` subcommands.
struct EventsAnalysis {
  std::size_t bins = 0;
  Histogram histogram;
  FringeFit fit;
  long fringe_count = 0;
  std::optional<G2Result> g2;
};

/// Histogram over the config's detector window at fringe_bins_per_period bins per model period.
std::size_t histogram_bins(const ToolkitConfig& config, const DetectorWindow& window);
/// Histogram fit, then g2 with the fitted spacing over the config's frequency grid.
EventsAnalysis analyze_events(const ToolkitConfig& config, const EventList& events, bool with_g2 = true);
/// Detector window the events stage uses for this config.
DetectorWindow events_window(const ToolkitConfig& config);

/// Exception class name used in error records.
std::string error_kind(const std::exception& e);

}  // namespace cohsrc
