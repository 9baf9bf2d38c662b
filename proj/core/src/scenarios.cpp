#include "cohsrc/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "cohsrc/io.hpp"
#include "cohsrc/physics_constants.hpp"

#ifndef COHSRC_VERSION
#define COHSRC_VERSION "0.0.0"
#endif

namespace cohsrc {

namespace {

using constants::kPi;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string exact(double v) { return fmt("%.17g", v); }

// Every state, or an even subsample capped at `limit` rows (first and last kept).
Trajectory thinned(const Trajectory& t, std::size_t limit = 5000) {
  if (t.states.size() <= limit) return t;
  Trajectory out = t;
  out.states.clear();
  const std::size_t stride = (t.states.size() + limit - 1) / limit;
  for (std::size_t i = 0; i < t.states.size(); i += stride) out.states.push_back(t.states[i]);
  if ((t.states.size() - 1) % stride != 0) out.states.push_back(t.states.back());
  return out;
}

std::string step_prefix(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%02zu_", index);
  return buf;
}

struct RunContext {
  std::filesystem::path dir;
  std::string basis_key;
  std::optional<FieldBasis> basis;
  std::shared_ptr<const Geometry> basis_geometry;
};

struct StepContext {
  const ToolkitConfig& config;
  StepRecord& record;
  RunContext& run;
  std::optional<Geometry> geometry;
  std::optional<PotentialGrid> grid;

  std::filesystem::path file(const std::string& name) {
    const std::string rel = step_prefix(record.index) + name;
    record.files.push_back(rel);
    return run.dir / rel;
  }
};

std::string geometry_key(const ToolkitConfig& c) {
  std::string key;
  for (const auto& k : config_keys()) {
    if (k.rfind("geometry_", 0) == 0 || k.rfind("solver_", 0) == 0) key += get_setting(c, k) + ";";
  }
  return key;
}

SolverOptions solver_options(const ToolkitConfig& c) {
  SolverOptions o;
  o.tolerance = c.solver_tolerance;
  o.max_iterations = c.solver_max_iterations;
  return o;
}

TraceOptions trace_options(const ToolkitConfig& c, const Geometry& g) {
  TraceOptions o = c.trace.options;
  o.transmit_x = g.transmit_plane_x();
  return o;
}

void run_field(StepContext& ctx, bool use_basis) {
  const auto& c = ctx.config;
  auto& out = ctx.record.outputs;
  if (use_basis) {
    const std::string key = geometry_key(c);
    if (!ctx.run.basis || ctx.run.basis_key != key) {
      ctx.run.basis_geometry = std::make_shared<const Geometry>(build_geometry(c.geometry));
      ctx.run.basis.emplace(ctx.run.basis_geometry->shared_layout(),
                            std::vector<ElectrodeId>{electrodes::kTip, electrodes::kCounter}, solver_options(c));
      ctx.run.basis_key = key;
    }
    ctx.geometry = *ctx.run.basis_geometry;
    ctx.grid = ctx.run.basis->combine(*ctx.geometry, c.voltages);
  } else {
    ctx.geometry = build_geometry(c.geometry);
    ctx.grid = solve_laplace(*ctx.geometry, c.voltages, solver_options(c));
  }
  const auto& grid = *ctx.grid;
  const auto& g = *ctx.geometry;
  const auto& st = grid.stats();
  out["solve_iterations"] = static_cast<double>(st.iterations);
  out["solve_tolerance_V"] = st.tolerance;
  out["solve_error_estimate_V"] = st.error_estimate;
  out["solve_stencil_residual_V"] = st.stencil_residual;
  out["max_principle_violation_V"] = max_principle_violation(grid);
  const auto [lo, hi] = std::minmax_element(grid.values().begin(), grid.values().end());
  out["phi_min_V"] = *lo;
  out["phi_max_V"] = *hi;
  const double mid = 0.5 * (g.apex_node_x() + c.geometry.aperture1_x - 0.5 * c.geometry.aperture_thickness);
  out["axis_field_x_V_per_m"] = field_at(grid, {mid, 0.0}).x;
  write_potential_csv(ctx.file("potential.csv"), grid, 2);

  const ParticleState start{0.0, g.apex_launch_point(), {0.0, 0.0}};
  const Trajectory t = integrate_trajectory(grid, start, trace_options(c, g));
  ctx.record.labels["apex_outcome"] = outcome_label(t, grid.layout());
  out["apex_steps"] = static_cast<double>(t.states.size());
  out["apex_flight_time_s"] = t.states.back().t;
  out["apex_energy_error_max"] = max_relative_energy_error(t, grid);
  out["expected_energy_eV"] = std::abs(c.voltages.u_sat - c.voltages.u_ground);
  if (t.termination == Termination::kTransmitted) out["terminal_energy_eV"] = terminal_energy(t, grid);
  write_trajectory_csv(ctx.file("apex_trajectory.csv"), thinned(t));
  if (t.termination != Termination::kTransmitted) {
    throw StateError("apex electron was not transmitted (" + ctx.record.labels["apex_outcome"] + ")");
  }
}

void run_fan(StepContext& ctx) {
  const auto& c = ctx.config;
  if (!ctx.grid) throw PreconditionError("the fan stage needs the field stage");
  if (c.trace.fan_angles_deg.empty()) return;
  LaunchFan fan = c.trace.fan;
  fan.polar_angles_rad.clear();
  for (double a : c.trace.fan_angles_deg) fan.polar_angles_rad.push_back(a * kPi / 180.0);
  const auto starts = make_fan(*ctx.geometry, fan);
  const auto bundle = classify_bundle(*ctx.grid, starts, trace_options(c, *ctx.geometry));
  auto& out = ctx.record.outputs;
  out["fan_trajectories"] = static_cast<double>(bundle.trajectories.size());
  for (const auto& [label, n] : bundle.histogram) out["fan_" + label] = static_cast<double>(n);
  double worst = 0.0;
  for (std::size_t k = 0; k < bundle.trajectories.size(); ++k) {
    const auto& t = bundle.trajectories[k];
    worst = std::max(worst, max_relative_energy_error(t, *ctx.grid));
    const std::string angle = fmt("%03.0f", c.trace.fan_angles_deg[k]);
    ctx.record.labels["fan_" + angle + "deg"] = outcome_label(t, ctx.grid->layout());
    write_trajectory_csv(ctx.file("fan_" + angle + "deg.csv"), thinned(t));
  }
  out["fan_energy_error_max"] = worst;
}

void run_emission(StepContext& ctx) {
  const auto& c = ctx.config;
  auto& out = ctx.record.outputs;
  out["u_sat_V"] = c.voltages.u_sat;
  out["u_c_V"] = c.voltages.u_c;
  const double drive = fn_drive_voltage(c.emission, c.voltages);
  out["fn_drive_V"] = drive;
  out["emission_rate_Hz"] = fn_rate(c.emission, drive);
  out["rate_Hz"] = detector_rate(c.emission, c.voltages);
  const BeamParams beam = beam_for(c);
  out["kinetic_energy_eV"] = beam.kinetic_energy_ev;
  out["wavelength_m"] = beam.wavelength;
  out["theta_rad"] = beam.theta;
  out["magnification"] = beam.magnification;
  out["s0_m"] = beam.s0;
  out["s_m"] = beam.s;
  const FringeParams pattern = pattern_for(c, beam);
  out["fringe_count"] = count_fringes(pattern, c.fringe.count_threshold);
}

void run_events(StepContext& ctx) {
  const auto& c = ctx.config;
  auto& out = ctx.record.outputs;
  const BeamParams beam = beam_for(c);
  const FringeParams pattern = pattern_for(c, beam);
  const DephasingModel dephasing = dephasing_for(c);
  const DetectorWindow window = events_window(c);
  const double duration = events_duration(c);
  const EventList generated = generate_events(pattern, dephasing, c.events.rate, duration, c.events.seed, window);
  const auto path = ctx.file("events.csv");
  write_events_csv(path, generated);
  const EventList events = read_events_csv(path, window, duration);

  out["planted_contrast"] = pattern.contrast;
  out["planted_amplitude_pi"] = c.dephasing.amplitude_pi;
  out["planted_frequency_Hz"] = dephasing.frequency;
  out["expected_c_raw"] = pattern.contrast * std::cyl_bessel_j(0.0, dephasing.amplitude);
  out["events"] = static_cast<double>(events.events.size());
  out["duration_s"] = duration;

  const EventsAnalysis a = analyze_events(c, events);
  write_histogram_csv(ctx.file("histogram.csv"), a.histogram);
  out["histogram_bins"] = static_cast<double>(a.bins);
  out["c_raw"] = a.fit.params.contrast;
  out["c_raw_sigma"] = a.fit.sigma.contrast;
  out["s_fit_m"] = a.fit.params.spacing;
  out["s_fit_sigma_m"] = a.fit.sigma.spacing;
  out["s1_fit_m"] = a.fit.params.envelope_width;
  out["phi0_fit_rad"] = a.fit.params.phi0;
  out["fit_reduced_chi2"] = a.fit.reduced_chi2();
  out["fringe_count_fit"] = static_cast<double>(a.fringe_count);
  const G2Result& g = *a.g2;
  write_g2_csv(ctx.file("g2.csv"), g.slices);
  out["c_corrected"] = g.c_corrected;
  out["c_corrected_sigma"] = g.c_sigma;
  out["amplitude_pi"] = g.amplitude / kPi;
  out["amplitude_sigma_pi"] = g.amplitude_sigma / kPi;
  out["frequency_Hz"] = g.frequency;
  out["g2_reduced_chi2"] = g.reduced_chi2;
  out["low_statistics"] = g.low_statistics ? 1.0 : 0.0;
}

void run_wien(StepContext& ctx) {
  const auto& c = ctx.config;
  auto& out = ctx.record.outputs;
  const BeamParams beam = beam_for(c);
  WienSweepSpec spec = c.wien_sweep;
  spec.seed = c.events.seed;
  const auto path = ctx.file("wien.csv");
  write_wien_csv(path, synthesize_wien_sweep(spec, beam, c.wien));
  const auto points = read_wien_csv(path);
  const CoherenceResult r = analyze_wien_sweep(points, beam, c.wien);
  out["planted_l_c_m"] = spec.l_c;
  out["sigma_v_V"] = r.sigma_v;
  out["sigma_v_err_V"] = r.sigma_v_err;
  out["center_v_V"] = r.center_v;
  out["c0"] = r.c0;
  out["c0_err"] = r.c0_err;
  out["u_cl_V"] = r.u_cl;
  out["u_cl_over_sigma"] = r.u_cl / r.sigma_v;
  out["l_c_m"] = r.l_c;
  out["l_c_err_m"] = r.l_c_err;
  out["delta_e_eV"] = r.delta_e;
  out["delta_e_err_eV"] = r.delta_e_err;
  out["identity_residual"] =
      (r.delta_e * r.l_c) / (2.0 * std::abs(c.voltages.u_sat) * beam.wavelength / kPi) - 1.0;
  out["wien_reduced_chi2"] = r.reduced_chi2;
  out["weighted"] = r.weighted ? 1.0 : 0.0;
}

ToolkitConfig apply_all(ToolkitConfig config, const std::vector<Setting>& settings, const std::string& where) {
  for (const auto& s : settings) {
    const std::string message = apply_setting(config, s.key, s.value);
    if (!message.empty()) throw ValidationError(where + ": " + s.key + ": " + message);
  }
  return config;
}

std::vector<StepSpec> expand_steps(const Scenario& scenario, const ToolkitConfig& config) {
  if (!scenario.steps.empty()) return scenario.steps;
  const auto values = sweep_values(config.sweep);
  if (values.empty()) return {StepSpec{"single", {}}};
  std::vector<StepSpec> out;
  for (double v : values) {
    const std::string text = exact(v);
    out.push_back({config.sweep.parameter + "=" + fmt("%g", v), {{config.sweep.parameter, text}}});
  }
  return out;
}

const double* find_output(const StepRecord& s, const std::string& key) {
  const auto it = s.outputs.find(key);
  return it == s.outputs.end() ? nullptr : &it->second;
}

std::vector<std::pair<const StepRecord*, double>> collect(const RunReport& r, const std::string& key) {
  std::vector<std::pair<const StepRecord*, double>> out;
  for (const auto& s : r.steps) {
    if (const double* v = find_output(s, key)) out.emplace_back(&s, *v);
  }
  return out;
}

void add_check(RunReport& r, std::string name, bool passed, double value, std::string detail) {
  r.checks.push_back({std::move(name), passed, value, std::move(detail)});
}

void summarize(const Scenario& scenario, RunReport& r, const std::filesystem::path& dir) {
  for (const Summary kind : scenario.summaries) {
    switch (kind) {
      case Summary::kTerminalEnergy: {
        const auto e = collect(r, "terminal_energy_eV");
        double worst = 0.0;
        for (const auto& [s, v] : e) worst = std::max(worst, std::abs(v - *find_output(*s, "expected_energy_eV")));
        r.derived["terminal_energy_max_deviation_eV"] = worst;
        add_check(r, "terminal_energy", !e.empty() && e.size() == r.steps.size() && worst <= 0.1, worst,
                  "|KE - e|U_SAT|| <= 0.1 eV at every step");
        break;
      }
      case Summary::kEnergyConservation: {
        double worst = 0.0;
        for (const auto& key : {"apex_energy_error_max", "fan_energy_error_max"}) {
          for (const auto& [s, v] : collect(r, key)) worst = std::max(worst, v);
        }
        r.derived["energy_error_max"] = worst;
        add_check(r, "energy_conservation", worst < 1e-6, worst, "relative energy error < 1e-6 on every state");
        break;
      }
      case Summary::kCounterHits: {
        double hits = 0.0;
        for (const auto& [s, v] : collect(r, "fan_hit:counter")) hits += v;
        r.derived["counter_hits"] = hits;
        add_check(r, "counter_hits", hits >= 1.0, hits, "at least one fan trajectory ends on the counter electrode");
        break;
      }
      case Summary::kRateRatio:
      case Summary::kRateRatio33: {
        const auto rates = collect(r, "rate_Hz");
        if (rates.size() < 2) {
          add_check(r, "rate_ratio", false, 0.0, "needs at least two steps with a rate");
          break;
        }
        const double ratio = rates.back().second / rates.front().second;
        r.derived["rate_ratio"] = ratio;
        if (kind == Summary::kRateRatio33) {
          add_check(r, "rate_ratio", std::abs(ratio - 33.0) <= 1.0, ratio, "last / first rate = 33 +- 1");
        }
        break;
      }
      case Summary::kFnCalibration: {
        std::vector<FnPoint> points;
        for (const auto& [s, v] : collect(r, "rate_Hz")) points.push_back({*find_output(*s, "fn_drive_V"), v});
        if (points.size() < 2) {
          add_check(r, "fn_collinearity", false, 0.0, "needs at least two steps with a rate");
          break;
        }
        std::vector<FnPlotPoint> plot;
        for (const auto& p : points) plot.push_back(to_fn_coordinates(p));
        write_fn_points_csv(dir / "fn_points.csv", points);
        write_fn_plot_csv(dir / "fn_plot.csv", plot);
        r.files.push_back("fn_points.csv");
        r.files.push_back("fn_plot.csv");
        const double residual = fn_collinearity_residual(plot);
        const FnCalibration cal = calibrate_fn(points);
        r.derived["fn_a"] = cal.params.a;
        r.derived["fn_b_V"] = cal.params.b;
        r.derived["fn_collinearity_residual"] = residual;
        add_check(r, "fn_collinearity", residual < 1e-10, residual, "FN plot collinearity residual < 1e-10");
        break;
      }
      case Summary::kSpacingConstant: {
        const auto s = collect(r, "s_m");
        if (s.empty()) break;
        const auto [lo, hi] = std::minmax_element(s.begin(), s.end(),
                                                  [](const auto& a, const auto& b) { return a.second < b.second; });
        const double spread = (hi->second - lo->second) / hi->second;
        r.derived["s_relative_spread"] = spread;
        add_check(r, "spacing_constant", spread <= 1e-12, spread, "fringe spacing identical across steps");
        break;
      }
      case Summary::kSpacingDecreasing: {
        auto s = collect(r, "s_m");
        std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) {
          return std::abs(*find_output(*a.first, "u_sat_V")) < std::abs(*find_output(*b.first, "u_sat_V"));
        });
        bool ok = s.size() >= 2;
        for (std::size_t i = 1; i < s.size(); ++i) ok = ok && s[i].second < s[i - 1].second;
        if (!s.empty()) r.derived["s_first_over_last"] = s.front().second / s.back().second;
        add_check(r, "spacing_decreasing", ok, static_cast<double>(s.size()),
                  "fringe spacing strictly decreasing with |U_SAT|");
        break;
      }
      case Summary::kFringeCountConstant: {
        const auto n = collect(r, "fringe_count");
        bool ok = !n.empty();
        for (const auto& [s, v] : n) ok = ok && v == n.front().second;
        if (!n.empty()) r.derived["fringe_count"] = n.front().second;
        add_check(r, "fringe_count_constant", ok, n.empty() ? 0.0 : n.front().second,
                  "fringe count identical across steps");
        break;
      }
      case Summary::kContrastRecovery: {
        const auto c = collect(r, "c_corrected");
        double worst_c = 0.0;
        double worst_a = 0.0;
        for (const auto& [s, v] : c) {
          worst_c = std::max(worst_c, std::abs(v - *find_output(*s, "planted_contrast")));
          worst_a = std::max(worst_a, std::abs(*find_output(*s, "amplitude_pi") - *find_output(*s, "planted_amplitude_pi")));
        }
        r.derived["contrast_max_deviation"] = worst_c;
        r.derived["amplitude_max_deviation_pi"] = worst_a;
        const bool all = !c.empty() && c.size() == r.steps.size();
        add_check(r, "contrast_recovery", all && worst_c <= 0.03, worst_c, "|C_g2 - C_planted| <= 0.03");
        add_check(r, "amplitude_recovery", all && worst_a <= 0.05, worst_a, "|A_g2 - A_planted| <= 0.05 pi");
        break;
      }
      case Summary::kCoherenceConsistent: {
        const auto l = collect(r, "l_c_m");
        bool ok = l.size() >= 2;
        double worst = 0.0;
        for (std::size_t i = 0; i < l.size(); ++i) {
          for (std::size_t j = i + 1; j < l.size(); ++j) {
            const double diff = std::abs(l[i].second - l[j].second);
            const double allowed = *find_output(*l[i].first, "l_c_err_m") + *find_output(*l[j].first, "l_c_err_m");
            worst = std::max(worst, diff / allowed);
            ok = ok && diff <= allowed;
          }
        }
        double mean = 0.0;
        for (const auto& [s, v] : l) mean += v / static_cast<double>(l.size());
        r.derived["l_c_mean_m"] = mean;
        r.derived["l_c_max_difference_over_errors"] = worst;
        add_check(r, "coherence_consistent", ok, worst, "|l_c,i - l_c,j| <= err_i + err_j for every pair");
        break;
      }
    }
  }
}

}  // namespace

std::string toolkit_version() { return COHSRC_VERSION; }

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::kField: return "field";
    case Stage::kFan: return "fan";
    case Stage::kEmission: return "emission";
    case Stage::kEvents: return "events";
    case Stage::kWien: return "wien";
  }
  return "unknown";
}

std::string to_string(Summary summary) {
  switch (summary) {
    case Summary::kTerminalEnergy: return "terminal_energy";
    case Summary::kEnergyConservation: return "energy_conservation";
    case Summary::kCounterHits: return "counter_hits";
    case Summary::kRateRatio: return "rate_ratio";
    case Summary::kRateRatio33: return "rate_ratio_33";
    case Summary::kFnCalibration: return "fn_calibration";
    case Summary::kSpacingConstant: return "spacing_constant";
    case Summary::kSpacingDecreasing: return "spacing_decreasing";
    case Summary::kFringeCountConstant: return "fringe_count_constant";
    case Summary::kContrastRecovery: return "contrast_recovery";
    case Summary::kCoherenceConsistent: return "coherence_consistent";
  }
  return "unknown";
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ConvergenceError*>(&e)) return "ConvergenceError";
  if (dynamic_cast<const FitError*>(&e)) return "FitError";
  if (dynamic_cast<const FrequencySearchError*>(&e)) return "FrequencySearchError";
  if (dynamic_cast<const PreconditionError*>(&e)) return "PreconditionError";
  if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
  if (dynamic_cast<const StateError*>(&e)) return "StateError";
  if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
  if (dynamic_cast<const Error*>(&e)) return "Error";
  return "InternalError";
}

DetectorWindow events_window(const ToolkitConfig& config) {
  return default_window(pattern_for(config, beam_for(config)));
}

std::size_t histogram_bins(const ToolkitConfig& config, const DetectorWindow& window) {
  const double s = pattern_for(config, beam_for(config)).spacing;
  const double bins = std::round((window.x_max - window.x_min) / s * config.fringe.bins_per_period);
  return static_cast<std::size_t>(std::max(8.0, bins));
}

EventsAnalysis analyze_events(const ToolkitConfig& config, const EventList& events, bool with_g2) {
  EventsAnalysis a;
  a.bins = histogram_bins(config, events.window);
  a.histogram = histogram_x(events, a.bins);
  a.fit = histogram_contrast(events, a.bins);
  a.fringe_count = count_fringes(a.fit.params, config.fringe.count_threshold);
  if (with_g2) {
    const auto grid = frequency_grid(config);
    a.g2 = g2_contrast(events, a.fit.params.spacing, grid);
  }
  return a;
}

bool RunReport::ok() const {
  if (aborted) return false;
  for (const auto& s : steps) {
    if (s.error) return false;
  }
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

std::string RunReport::to_json() const {
  using nlohmann::ordered_json;
  ordered_json j;
  j["schema_version"] = schema_version;
  j["toolkit_version"] = toolkit_version;
  j["scenario"] = scenario;
  j["description"] = description;
  j["seed"] = seed;
  j["ok"] = ok();
  j["aborted"] = aborted;
  j["steps"] = ordered_json::array();
  for (const auto& s : steps) {
    ordered_json js;
    js["index"] = s.index;
    js["label"] = s.label;
    js["seed"] = s.seed;
    js["settings"] = ordered_json::object();
    for (const auto& kv : s.settings) js["settings"][kv.key] = kv.value;
    js["outputs"] = s.outputs;
    js["labels"] = s.labels;
    js["files"] = s.files;
    if (s.error) {
      js["error"] = {{"kind", s.error->kind}, {"message", s.error->message}};
    } else {
      js["error"] = nullptr;
    }
    j["steps"].push_back(std::move(js));
  }
  j["derived"] = derived;
  j["checks"] = ordered_json::array();
  for (const auto& c : checks) {
    j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"detail", c.detail}});
  }
  j["files"] = files;
  return j.dump(2) + "\n";
}

std::vector<ToolkitConfig> scenario_step_configs(const Scenario& scenario, const ToolkitConfig& base) {
  const ToolkitConfig config = apply_all(base, scenario.settings, scenario.name);
  std::vector<ToolkitConfig> out;
  for (const auto& step : expand_steps(scenario, config)) {
    out.push_back(apply_all(config, step.settings, scenario.name + "/" + step.label));
  }
  return out;
}

std::vector<Violation> validate_scenario(const Scenario& scenario, const ToolkitConfig& base) {
  std::vector<Violation> out;
  if (scenario.pipeline.empty()) out.push_back({scenario.name, "pipeline has no stages"});
  ToolkitConfig config;
  try {
    config = apply_all(base, scenario.settings, scenario.name);
  } catch (const ValidationError& e) {
    out.push_back({scenario.name, e.what()});
    return out;
  }
  const auto steps = expand_steps(scenario, config);
  if (steps.empty()) out.push_back({scenario.name, "sweep has no steps"});
  for (const auto& step : steps) {
    try {
      const ToolkitConfig c = apply_all(config, step.settings, scenario.name + "/" + step.label);
      for (const auto& v : validate_config(c)) out.push_back({step.label + "." + v.key, v.message});
    } catch (const ValidationError& e) {
      out.push_back({step.label, e.what()});
    }
  }
  return out;
}

RunReport run_scenario(const Scenario& scenario, const RunOptions& options) {
  ToolkitConfig base = options.base;
  if (options.seed) base.events.seed = *options.seed;
  if (const auto v = validate_scenario(scenario, base); !v.empty()) {
    std::string message = "scenario '" + scenario.name + "' does not validate:";
    for (const auto& x : v) message += "\n  " + x.key + ": " + x.message;
    throw ValidationError(message);
  }
  const ToolkitConfig config = apply_all(base, scenario.settings, scenario.name);
  const auto steps = expand_steps(scenario, config);

  RunContext run;
  run.dir = options.out_dir / scenario.name;
  std::filesystem::create_directories(run.dir);

  RunReport report;
  report.toolkit_version = toolkit_version();
  report.scenario = scenario.name;
  report.description = scenario.description;
  report.seed = config.events.seed;

  for (std::size_t i = 0; i < steps.size(); ++i) {
    StepRecord record;
    record.index = i;
    record.label = steps[i].label;
    record.settings = steps[i].settings;
    ToolkitConfig step_config = apply_all(config, steps[i].settings, scenario.name);
    step_config.events.seed = config.events.seed + i;
    record.seed = step_config.events.seed;
    StepContext ctx{step_config, record, run, std::nullopt, std::nullopt};
    try {
      {
        std::ofstream cfg(ctx.file("config.cfg"));
        cfg << render_config(step_config);
      }
      for (const Stage stage : scenario.pipeline) {
        switch (stage) {
          case Stage::kField: run_field(ctx, scenario.field_basis); break;
          case Stage::kFan: run_fan(ctx); break;
          case Stage::kEmission: run_emission(ctx); break;
          case Stage::kEvents: run_events(ctx); break;
          case Stage::kWien: run_wien(ctx); break;
        }
      }
    } catch (const std::exception& e) {
      record.error = StepError{error_kind(e), e.what()};
    }
    const bool failed = record.error.has_value();
    report.steps.push_back(std::move(record));
    if (failed && options.fail_fast) {
      report.aborted = i + 1 < steps.size();
      break;
    }
  }

  summarize(scenario, report, run.dir);
  std::ofstream(run.dir / "report.json") << report.to_json();
  return report;
}

const std::vector<Scenario>& builtin_scenarios() {
  static const std::vector<Scenario> catalog = [] {
    using S = Summary;
    const std::string m600 = exact(magnification_from_measurement(9.0e-3, 928e-9));
    std::vector<Scenario> c;
    c.push_back({"fig4a",
                 "Field and trajectories at U_SAT = -1600 V, U_c = +200 V; apex electron and a narrow fan",
                 {Stage::kField, Stage::kFan, Stage::kEmission},
                 {{"voltages_u_sat", "-1600"}, {"voltages_u_c", "200"}, {"trace_fan_angles_deg", "0,10,20,30"}},
                 {},
                 {S::kTerminalEnergy, S::kEnergyConservation},
                 false});
    c.push_back({"fig4c",
                 "Field and trajectories at U_SAT = -600 V, U_c = +1378 V; wide fan shows back-deflection",
                 {Stage::kField, Stage::kFan, Stage::kEmission},
                 {{"voltages_u_sat", "-600"},
                  {"voltages_u_c", "1378"},
                  {"trace_launch_distance", "50e-6"},
                  {"trace_fan_angles_deg", "0,10,20,30,40,50,60,70,80,90,100,110,120"}},
                 {},
                 {S::kTerminalEnergy, S::kEnergyConservation, S::kCounterHits},
                 false});
    c.push_back({"fig2a_c",
                 "U_SAT sweep at U_c = 0: emission rate, fringe spacing and FN plot",
                 {Stage::kField, Stage::kEmission},
                 {{"voltages_u_c", "0"},
                  {"sweep_parameter", "voltages_u_sat"},
                  {"sweep_start", "-1560"},
                  {"sweep_stop", "-1800"},
                  {"sweep_steps", "5"}},
                 {},
                 {S::kTerminalEnergy, S::kRateRatio, S::kFnCalibration, S::kSpacingDecreasing},
                 true});
    c.push_back({"fig2d_f",
                 "U_c sweep at U_SAT = -1600 V: rate rises ~33x while spacing, energy and fringe count stay fixed",
                 {Stage::kField, Stage::kEmission},
                 {{"voltages_u_sat", "-1600"},
                  {"sweep_parameter", "voltages_u_c"},
                  {"sweep_start", "-119.7"},
                  {"sweep_stop", "199.7"},
                  {"sweep_steps", "5"}},
                 {},
                 {S::kTerminalEnergy, S::kRateRatio33, S::kFnCalibration, S::kSpacingConstant,
                  S::kFringeCountConstant},
                 true});
    c.push_back({"interferogram_pair",
                 "Interferograms at U_c = -119.7 V and +199.7 V with 50 Hz dephasing; histogram and g2 contrasts",
                 {Stage::kEmission, Stage::kEvents},
                 {{"voltages_u_sat", "-1600"}, {"dephasing_amplitude_pi", "0.4"}, {"events_count", "300000"}},
                 {{"u_c=-119.7", {{"voltages_u_c", "-119.7"}, {"fringe_contrast", "0.513"}}},
                  {"u_c=199.7", {{"voltages_u_c", "199.7"}, {"fringe_contrast", "0.535"}}}},
                 {S::kRateRatio33, S::kSpacingConstant, S::kFringeCountConstant, S::kContrastRecovery},
                 false});
    c.push_back({"wien_sweep",
                 "Wien-filter contrast sweeps at three U_c settings with the same planted coherence length",
                 {Stage::kEmission, Stage::kWien},
                 {{"voltages_u_sat", "-1600"}, {"wien_l_c", "82e-9"}},
                 {{"u_c=0", {{"voltages_u_c", "0"}}},
                  {"u_c=100.2", {{"voltages_u_c", "100.2"}}},
                  {"u_c=199.7", {{"voltages_u_c", "199.7"}}}},
                 {S::kCoherenceConsistent},
                 false});
    c.push_back({"lowenergy_600eV",
                 "600 eV operation at U_SAT = -600 V, U_c = +1378 V: trace, beam optics and g2 contrast",
                 {Stage::kField, Stage::kEmission, Stage::kEvents},
                 {{"voltages_u_sat", "-600"},
                  {"voltages_u_c", "1378"},
                  {"beam_magnification", m600},
                  {"fringe_contrast", "0.377"},
                  {"dephasing_amplitude_pi", "0.435"},
                  {"events_count", "300000"}},
                 {},
                 {S::kTerminalEnergy, S::kEnergyConservation, S::kContrastRecovery},
                 false});
    c.push_back({"custom",
                 "Config-driven run: solve, apex trace and emission at every sweep step",
                 {Stage::kField, Stage::kEmission},
                 {},
                 {},
                 {S::kEnergyConservation},
                 false});
    return c;
  }();
  return catalog;
}

std::vector<std::string> list_scenarios() {
  std::vector<std::string> out;
  for (const auto& s : builtin_scenarios()) out.push_back(s.name);
  return out;
}

const Scenario& find_scenario(const std::string& name) {
  for (const auto& s : builtin_scenarios()) {
    if (s.name == name) return s;
  }
  throw ValidationError("unknown scenario '" + name + "'");
}

}  // namespace cohsrc
