// cohsrc command-line front end. Exit codes: 0 success, 1 validation failure, 2 runtime error.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cohsrc/config.hpp"
#include "cohsrc/io.hpp"
#include "cohsrc/physics_constants.hpp"
#include "cohsrc/scenarios.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace cohsrc;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string input;
  bool fail_fast = false;
};

void add_common(CLI::App* sub, Common& c, bool with_input) {
  sub->add_option("--config", c.config, "Config file (key = value)");
  sub->add_option("--seed", c.seed, "Random seed (overrides events_seed)");
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_flag("--fail-fast", c.fail_fast, "Stop a sweep at the first failing step");
  if (with_input) sub->add_option("--input", c.input, "Input data file instead of generated data");
}

// Loads the config; violations are reported and turned into a validation exit.
struct ConfigError {};

ToolkitConfig load(const Common& c) {
  ToolkitConfig config;
  if (!c.config.empty()) {
    const ParsedConfig parsed = load_config(c.config);
    if (!parsed.violations.empty()) {
      for (const auto& v : parsed.violations) std::cerr << c.config << ": " << v.key << ": " << v.message << "\n";
      throw ConfigError{};
    }
    config = parsed.config;
  }
  if (c.seed) config.events.seed = *c.seed;
  return config;
}

fs::path out_file(const Common& c, const std::string& name) {
  fs::create_directories(c.out);
  return fs::path(c.out) / name;
}

void write_json(const Common& c, const std::string& name, const ordered_json& j) {
  const auto path = out_file(c, name);
  std::ofstream(path) << j.dump(2) << "\n";
  std::cout << j.dump(2) << "\n";
}

ordered_json fringe_json(const FringeParams& p) {
  return {{"i0", p.i0},           {"contrast", p.contrast},          {"spacing_m", p.spacing},
          {"phi0_rad", p.phi0},   {"envelope_width_m", p.envelope_width}, {"phi1_rad", p.phi1}};
}

int cmd_solve(const Common& c) {
  const ToolkitConfig config = load(c);
  const Geometry g = build_geometry(config.geometry);
  SolverOptions o;
  o.tolerance = config.solver_tolerance;
  o.max_iterations = config.solver_max_iterations;
  const PotentialGrid grid = solve_laplace(g, config.voltages, o);
  write_potential_csv(out_file(c, "potential.csv"), grid);
  const auto [lo, hi] = std::minmax_element(grid.values().begin(), grid.values().end());
  const auto& st = grid.stats();
  write_json(c, "solve.json",
             {{"schema_version", kReportSchemaVersion},
              {"nx", grid.layout().nx()},
              {"nr", grid.layout().nr()},
              {"spacing_m", grid.layout().spacing()},
              {"iterations", st.iterations},
              {"tolerance_V", st.tolerance},
              {"residual_V", st.max_correction},
              {"error_estimate_V", st.error_estimate},
              {"stencil_residual_V", st.stencil_residual},
              {"omega", st.omega},
              {"phi_min_V", *lo},
              {"phi_max_V", *hi},
              {"max_principle_violation_V", max_principle_violation(grid)}});
  return 0;
}

int cmd_trace(const Common& c) {
  const ToolkitConfig config = load(c);
  const Geometry g = build_geometry(config.geometry);
  SolverOptions so;
  so.tolerance = config.solver_tolerance;
  so.max_iterations = config.solver_max_iterations;
  const PotentialGrid grid = solve_laplace(g, config.voltages, so);
  TraceOptions to = config.trace.options;
  to.transmit_x = g.transmit_plane_x();

  std::vector<ParticleState> starts{{0.0, g.apex_launch_point(), {0.0, 0.0}}};
  std::vector<std::string> names{"apex"};
  if (!config.trace.fan_angles_deg.empty()) {
    LaunchFan fan = config.trace.fan;
    fan.polar_angles_rad.clear();
    for (double a : config.trace.fan_angles_deg) {
      fan.polar_angles_rad.push_back(a * constants::kPi / 180.0);
      char buf[32];
      std::snprintf(buf, sizeof buf, "fan_%03.0fdeg", a);
      names.emplace_back(buf);
    }
    for (const auto& s : make_fan(g, fan)) starts.push_back(s);
  }
  const BundleResult bundle = classify_bundle(grid, starts, to);
  ordered_json traj = ordered_json::array();
  for (std::size_t k = 0; k < bundle.trajectories.size(); ++k) {
    const auto& t = bundle.trajectories[k];
    write_trajectory_csv(out_file(c, names[k] + ".csv"), t);
    ordered_json j{{"name", names[k]},
                   {"outcome", outcome_label(t, grid.layout())},
                   {"states", t.states.size()},
                   {"flight_time_s", t.states.back().t},
                   {"total_energy_eV", t.total_energy_ev},
                   {"max_relative_energy_error", max_relative_energy_error(t, grid)}};
    j["terminal_energy_eV"] = t.termination == Termination::kTransmitted ? ordered_json(terminal_energy(t, grid))
                                                                          : ordered_json(nullptr);
    if (t.impact_point) j["impact_point_m"] = {t.impact_point->x, t.impact_point->r};
    traj.push_back(std::move(j));
  }
  write_json(c, "trace.json",
             {{"schema_version", kReportSchemaVersion}, {"outcomes", bundle.histogram}, {"trajectories", traj}});
  return 0;
}

int cmd_emit(const Common& c) {
  const ToolkitConfig config = load(c);
  FNParams params = config.emission;
  ordered_json j{{"schema_version", kReportSchemaVersion}};
  if (!c.input.empty()) {
    const auto points = read_fn_points_csv(c.input);
    const FnCalibration cal = calibrate_fn(points);
    params.a = cal.params.a;
    params.b = cal.params.b;
    j["calibration"] = {{"points", cal.points}, {"a", cal.params.a}, {"b_V", cal.params.b}, {"rms_residual", cal.residual}};
  }
  const double drive = fn_drive_voltage(params, config.voltages);
  j["drive"] = to_string(params.drive);
  j["drive_V"] = drive;
  j["emission_rate_Hz"] = fn_rate(params, drive);
  j["detector_rate_Hz"] = detector_rate(params, config.voltages);
  const auto plot = fn_plot(params, 0.8 * drive, 1.2 * drive, 41);
  write_fn_plot_csv(out_file(c, "fn_plot.csv"), plot);
  j["fn_plot_collinearity_residual"] = fn_collinearity_residual(plot);
  write_json(c, "emission.json", j);
  return 0;
}

int cmd_fringes(const Common& c) {
  const ToolkitConfig config = load(c);
  const BeamParams beam = beam_for(config);
  const FringeParams model = pattern_for(config, beam);
  ordered_json j{{"schema_version", kReportSchemaVersion},
                 {"beam",
                  {{"kinetic_energy_eV", beam.kinetic_energy_ev},
                   {"wavelength_m", beam.wavelength},
                   {"theta_rad", beam.theta},
                   {"magnification", beam.magnification},
                   {"s0_m", beam.s0},
                   {"s_m", beam.s}}},
                 {"model", fringe_json(model)},
                 {"model_fringe_count", count_fringes(model, config.fringe.count_threshold)}};
  if (c.input.empty()) {
    const DetectorWindow w = default_window(model);
    const std::size_t n = histogram_bins(config, w) * 4;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = w.x_min + (w.x_max - w.x_min) * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      rows.push_back({x, intensity_pattern(model, x)});
    }
    write_csv(out_file(c, "pattern.csv"), {"x_m", "intensity"}, rows);
  } else {
    FringeFit fit;
    std::size_t bins = 0;
    if (fs::path(c.input).filename().string().find("histogram") != std::string::npos) {
      const Histogram h = read_histogram_csv(c.input);
      bins = h.centers.size();
      fit = fit_fringes(h);
    } else {
      const EventList events = read_events_csv(c.input, events_window(config), events_duration(config));
      const EventsAnalysis a = analyze_events(config, events, false);
      bins = a.bins;
      fit = a.fit;
      write_histogram_csv(out_file(c, "histogram.csv"), a.histogram);
    }
    j["bins"] = bins;
    j["fit"] = fringe_json(fit.params);
    j["sigma"] = fringe_json(fit.sigma);
    j["reduced_chi2"] = fit.reduced_chi2();
    j["contrast_pinned"] = fit.contrast_pinned;
    j["fringe_count"] = count_fringes(fit.params, config.fringe.count_threshold);
  }
  write_json(c, "fringes.json", j);
  return 0;
}

int cmd_wien(const Common& c) {
  const ToolkitConfig config = load(c);
  const BeamParams beam = beam_for(config);
  std::vector<WienPoint> points;
  if (c.input.empty()) {
    WienSweepSpec spec = config.wien_sweep;
    spec.seed = config.events.seed;
    points = synthesize_wien_sweep(spec, beam, config.wien);
    write_wien_csv(out_file(c, "wien.csv"), points);
  } else {
    points = read_wien_csv(c.input);
  }
  const CoherenceResult r = analyze_wien_sweep(points, beam, config.wien);
  write_json(c, "wien.json",
             {{"schema_version", kReportSchemaVersion},
              {"points", points.size()},
              {"sigma_v_V", r.sigma_v},
              {"sigma_v_err_V", r.sigma_v_err},
              {"center_v_V", r.center_v},
              {"c0", r.c0},
              {"c0_err", r.c0_err},
              {"u_cl_V", r.u_cl},
              {"l_c_m", r.l_c},
              {"l_c_err_m", r.l_c_err},
              {"delta_e_eV", r.delta_e},
              {"delta_e_err_eV", r.delta_e_err},
              {"reduced_chi2", r.reduced_chi2},
              {"weighted", r.weighted},
              {"extrapolated", r.extrapolated}});
  return 0;
}

EventList generate(const ToolkitConfig& config) {
  const BeamParams beam = beam_for(config);
  return generate_events(pattern_for(config, beam), dephasing_for(config), config.events.rate,
                         events_duration(config), config.events.seed, events_window(config));
}

int cmd_events(const Common& c) {
  const ToolkitConfig config = load(c);
  const EventList events = generate(config);
  write_events_csv(out_file(c, "events.csv"), events);
  const auto& w = events.window;
  write_json(c, "events.json",
             {{"schema_version", kReportSchemaVersion},
              {"events", events.events.size()},
              {"duration_s", events.duration},
              {"rate_Hz", events.rate},
              {"mean_rate_Hz", events.mean_rate()},
              {"seed", events.seed},
              {"window_m", {w.x_min, w.x_max, w.y_min, w.y_max}}});
  return 0;
}

int cmd_g2(const Common& c) {
  const ToolkitConfig config = load(c);
  EventList events;
  if (c.input.empty()) {
    events = generate(config);
    write_events_csv(out_file(c, "events.csv"), events);
  }
  // Analysis always runs on the CSV representation so that a later --input run reproduces it.
  const fs::path source = c.input.empty() ? out_file(c, "events.csv") : fs::path(c.input);
  events = read_events_csv(source, events_window(config), events_duration(config));
  const EventsAnalysis a = analyze_events(config, events);
  const G2Result& g = *a.g2;
  write_g2_csv(out_file(c, "g2.csv"), g.slices);
  ordered_json scores = ordered_json::array();
  for (const auto& s : g.scores) scores.push_back({{"frequency_Hz", s.frequency}, {"reduced_chi2", s.reduced_chi2}});
  write_json(c, "g2.json",
             {{"schema_version", kReportSchemaVersion},
              {"events", events.events.size()},
              {"c_raw", a.fit.params.contrast},
              {"c_raw_sigma", a.fit.sigma.contrast},
              {"s_fit_m", a.fit.params.spacing},
              {"c_corrected", g.c_corrected},
              {"c_corrected_sigma", g.c_sigma},
              {"amplitude_rad", g.amplitude},
              {"amplitude_sigma_rad", g.amplitude_sigma},
              {"amplitude_pi", g.amplitude / constants::kPi},
              {"frequency_Hz", g.frequency},
              {"reduced_chi2", g.reduced_chi2},
              {"low_statistics", g.low_statistics},
              {"frequency_scores", scores}});
  return 0;
}

int cmd_scenario_list() {
  for (const auto& s : builtin_scenarios()) std::printf("%-20s %s\n", s.name.c_str(), s.description.c_str());
  return 0;
}

int cmd_scenario_run(const Common& c, const std::string& name) {
  RunOptions o;
  o.base = load(c);
  o.seed = c.seed;
  o.out_dir = c.out;
  o.fail_fast = c.fail_fast;
  const RunReport r = run_scenario(find_scenario(name), o);
  for (const auto& s : r.steps) {
    std::printf("step %zu %-16s %s\n", s.index, s.label.c_str(),
                s.error ? (s.error->kind + ": " + s.error->message).c_str() : "ok");
  }
  for (const auto& k : r.checks) {
    std::printf("%s %-24s %.6g  %s\n", k.passed ? "PASS" : "FAIL", k.name.c_str(), k.value, k.detail.c_str());
  }
  std::printf("report: %s\n", (fs::path(c.out) / name / "report.json").string().c_str());
  return r.ok() ? 0 : kExitRuntime;
}

int cmd_validate(const Common& c) {
  if (c.config.empty()) {
    std::cerr << "validate: --config is required\n";
    return kExitValidation;
  }
  const ParsedConfig parsed = load_config(c.config);
  for (const auto& v : parsed.violations) std::printf("%s: %s\n", v.key.c_str(), v.message.c_str());
  std::printf("%zu violation(s)\n", parsed.violations.size());
  return parsed.violations.empty() ? 0 : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tunable low-energy coherent electron source toolkit"};
  app.set_version_flag("--version", toolkit_version());
  app.require_subcommand(1);
  Common c;
  std::string scenario_name;

  auto* solve = app.add_subcommand("solve", "Solve the electrostatic field");
  auto* trace = app.add_subcommand("trace", "Trace the apex electron and the launch fan");
  auto* emit = app.add_subcommand("emit", "Fowler-Nordheim emission rate and FN plot");
  auto* fringes = app.add_subcommand("fringes", "Beam optics and fringe model, or a fringe fit of --input");
  auto* wien = app.add_subcommand("wien", "Wien-filter coherence analysis");
  auto* events = app.add_subcommand("events", "Generate single-electron events");
  auto* g2 = app.add_subcommand("g2", "Correlation analysis of an event list");
  auto* scenario = app.add_subcommand("scenario", "Built-in scenarios");
  scenario->require_subcommand(1);
  auto* run = scenario->add_subcommand("run", "Run a scenario");
  auto* list = scenario->add_subcommand("list", "List the built-in scenarios");
  auto* validate = app.add_subcommand("validate", "Validate a config file");
  run->add_option("name", scenario_name, "Scenario name")->required();

  for (auto* sub : {solve, trace, events, run, validate}) add_common(sub, c, false);
  for (auto* sub : {emit, fringes, wien, g2}) add_common(sub, c, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return cmd_solve(c);
    if (*trace) return cmd_trace(c);
    if (*emit) return cmd_emit(c);
    if (*fringes) return cmd_fringes(c);
    if (*wien) return cmd_wien(c);
    if (*events) return cmd_events(c);
    if (*g2) return cmd_g2(c);
    if (*list) return cmd_scenario_list();
    if (*run) return cmd_scenario_run(c, scenario_name);
    if (*validate) return cmd_validate(c);
  } catch (const ConfigError&) {
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << error_kind(e) << ": " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
