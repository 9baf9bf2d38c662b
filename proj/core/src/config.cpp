#include "cohsrc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "cohsrc/physics_constants.hpp"

namespace cohsrc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
bool parse_number(const std::string& text, T& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

struct Field {
  std::string key;
  std::function<std::string(ToolkitConfig&, const std::string&)> set;
  std::function<std::string(const ToolkitConfig&)> get;
};

template <class T>
using Ref = T& (*)(ToolkitConfig&);

template <class T>
Field number(std::string key, Ref<T> ref) {
  return {key,
          [ref](ToolkitConfig& c, const std::string& v) -> std::string {
            T parsed{};
            if (!parse_number(v, parsed)) return "'" + trim(v) + "' is not a valid number";
            if constexpr (std::is_floating_point_v<T>) {
              if (!std::isfinite(parsed)) return "value must be finite";
            }
            ref(c) = parsed;
            return {};
          },
          [ref](const ToolkitConfig& c) -> std::string {
            const T v = ref(const_cast<ToolkitConfig&>(c));
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(v);
            } else {
              return std::to_string(v);
            }
          }};
}

Field number_list(std::string key, Ref<std::vector<double>> ref) {
  return {key,
          [ref](ToolkitConfig& c, const std::string& v) -> std::string {
            std::vector<double> out;
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ',')) {
              if (trim(item).empty()) continue;
              double x = 0.0;
              if (!parse_number(item, x) || !std::isfinite(x)) return "'" + trim(item) + "' is not a valid number";
              out.push_back(x);
            }
            ref(c) = std::move(out);
            return {};
          },
          [ref](const ToolkitConfig& c) -> std::string {
            std::string out;
            for (double x : ref(const_cast<ToolkitConfig&>(c))) out += (out.empty() ? "" : ", ") + format_double(x);
            return out;
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    using C = ToolkitConfig;
    std::vector<Field> f;
    f.push_back(number<double>("geometry_tip_apex_x", [](C& c) -> double& { return c.geometry.tip_apex_x; }));
    f.push_back(number<double>("geometry_tip_radius", [](C& c) -> double& { return c.geometry.tip_radius; }));
    f.push_back(number<double>("geometry_wire_diameter", [](C& c) -> double& { return c.geometry.wire_diameter; }));
    f.push_back(number<double>("geometry_tip_taper_length", [](C& c) -> double& { return c.geometry.tip_taper_length; }));
    f.push_back(number<double>("geometry_aperture1_x", [](C& c) -> double& { return c.geometry.aperture1_x; }));
    f.push_back(number<double>("geometry_aperture2_x", [](C& c) -> double& { return c.geometry.aperture2_x; }));
    f.push_back(number<double>("geometry_aperture_hole_diameter", [](C& c) -> double& { return c.geometry.aperture_hole_diameter; }));
    f.push_back(number<double>("geometry_aperture_thickness", [](C& c) -> double& { return c.geometry.aperture_thickness; }));
    f.push_back(number<double>("geometry_domain_length", [](C& c) -> double& { return c.geometry.domain_length; }));
    f.push_back(number<double>("geometry_domain_radius", [](C& c) -> double& { return c.geometry.domain_radius; }));
    f.push_back(number<double>("geometry_grid_spacing", [](C& c) -> double& { return c.geometry.grid_spacing; }));

    f.push_back(number<double>("voltages_u_sat", [](C& c) -> double& { return c.voltages.u_sat; }));
    f.push_back(number<double>("voltages_u_c", [](C& c) -> double& { return c.voltages.u_c; }));
    f.push_back(number<double>("voltages_u_ground", [](C& c) -> double& { return c.voltages.u_ground; }));

    f.push_back(number<double>("solver_tolerance", [](C& c) -> double& { return c.solver_tolerance; }));
    f.push_back(number<long>("solver_max_iterations", [](C& c) -> long& { return c.solver_max_iterations; }));

    f.push_back(number<double>("trace_dt_max", [](C& c) -> double& { return c.trace.options.dt_max; }));
    f.push_back(number<long>("trace_step_limit", [](C& c) -> long& { return c.trace.options.step_limit; }));
    f.push_back(number<double>("trace_cell_fraction", [](C& c) -> double& { return c.trace.options.cell_fraction; }));
    f.push_back(number<double>("trace_step_energy_tolerance", [](C& c) -> double& { return c.trace.options.step_energy_tolerance; }));
    f.push_back(number<long>("trace_store_every", [](C& c) -> long& { return c.trace.options.store_every; }));
    f.push_back(number<double>("trace_launch_distance", [](C& c) -> double& { return c.trace.fan.launch_distance; }));
    f.push_back(number<double>("trace_initial_energy_ev", [](C& c) -> double& { return c.trace.fan.initial_energy_ev; }));
    f.push_back(number_list("trace_fan_angles_deg", [](C& c) -> std::vector<double>& { return c.trace.fan_angles_deg; }));

    f.push_back({"emission_drive",
                 [](C& c, const std::string& v) -> std::string {
                   try {
                     c.emission.drive = fn_drive_from_string(trim(v));
                   } catch (const ValidationError& e) {
                     return e.what();
                   }
                   return {};
                 },
                 [](const C& c) { return to_string(c.emission.drive); }});
    f.push_back(number<double>("emission_a", [](C& c) -> double& { return c.emission.a; }));
    f.push_back(number<double>("emission_b", [](C& c) -> double& { return c.emission.b; }));
    f.push_back(number<double>("emission_transmission", [](C& c) -> double& { return c.emission.transmission; }));

    f.push_back(number<double>("beam_u_bp", [](C& c) -> double& { return c.beam.u_bp; }));
    f.push_back(number<double>("beam_gamma", [](C& c) -> double& { return c.beam.gamma; }));
    f.push_back(number<double>("beam_magnification", [](C& c) -> double& { return c.beam.magnification; }));
    f.push_back(number<double>("beam_wavelength", [](C& c) -> double& { return c.beam.wavelength; }));

    f.push_back(number<double>("fringe_contrast", [](C& c) -> double& { return c.fringe.contrast; }));
    f.push_back(number<double>("fringe_spacing", [](C& c) -> double& { return c.fringe.spacing; }));
    f.push_back(number<double>("fringe_envelope_periods", [](C& c) -> double& { return c.fringe.envelope_periods; }));
    f.push_back(number<double>("fringe_phi0", [](C& c) -> double& { return c.fringe.phi0; }));
    f.push_back(number<double>("fringe_phi1", [](C& c) -> double& { return c.fringe.phi1; }));
    f.push_back(number<int>("fringe_bins_per_period", [](C& c) -> int& { return c.fringe.bins_per_period; }));
    f.push_back(number<double>("fringe_count_threshold", [](C& c) -> double& { return c.fringe.count_threshold; }));

    f.push_back(number<double>("events_rate", [](C& c) -> double& { return c.events.rate; }));
    f.push_back(number<long>("events_count", [](C& c) -> long& { return c.events.count; }));
    f.push_back(number<std::uint64_t>("events_seed", [](C& c) -> std::uint64_t& { return c.events.seed; }));

    f.push_back(number<double>("dephasing_amplitude_pi", [](C& c) -> double& { return c.dephasing.amplitude_pi; }));
    f.push_back(number<double>("dephasing_frequency", [](C& c) -> double& { return c.dephasing.frequency; }));
    f.push_back(number<double>("dephasing_phase", [](C& c) -> double& { return c.dephasing.phase; }));
    f.push_back(number<double>("dephasing_grid_min", [](C& c) -> double& { return c.dephasing.grid_min; }));
    f.push_back(number<double>("dephasing_grid_max", [](C& c) -> double& { return c.dephasing.grid_max; }));
    f.push_back(number<double>("dephasing_grid_step", [](C& c) -> double& { return c.dephasing.grid_step; }));

    f.push_back(number<double>("wien_plate_length", [](C& c) -> double& { return c.wien.plate_length; }));
    f.push_back(number<double>("wien_plate_distance", [](C& c) -> double& { return c.wien.plate_distance; }));
    f.push_back(number<double>("wien_d_wf_qp", [](C& c) -> double& { return c.wien.d_wf_qp; }));
    f.push_back(number<double>("wien_u_wf", [](C& c) -> double& { return c.wien.u_wf; }));
    f.push_back(number<double>("wien_coil_field", [](C& c) -> double& { return c.wien.coil_field; }));
    f.push_back(number<double>("wien_l_c", [](C& c) -> double& { return c.wien_sweep.l_c; }));
    f.push_back(number<double>("wien_c0", [](C& c) -> double& { return c.wien_sweep.c0; }));
    f.push_back(number<double>("wien_center_v", [](C& c) -> double& { return c.wien_sweep.center_v; }));
    f.push_back(number<double>("wien_u_min", [](C& c) -> double& { return c.wien_sweep.u_min; }));
    f.push_back(number<double>("wien_u_max", [](C& c) -> double& { return c.wien_sweep.u_max; }));
    f.push_back(number<int>("wien_steps", [](C& c) -> int& { return c.wien_sweep.steps; }));
    f.push_back(number<double>("wien_sigma_contrast", [](C& c) -> double& { return c.wien_sweep.sigma_contrast; }));

    f.push_back({"sweep_parameter",
                 [](C& c, const std::string& v) -> std::string {
                   c.sweep.parameter = trim(v);
                   return {};
                 },
                 [](const C& c) { return c.sweep.parameter; }});
    f.push_back(number_list("sweep_values", [](C& c) -> std::vector<double>& { return c.sweep.values; }));
    f.push_back(number<double>("sweep_start", [](C& c) -> double& { return c.sweep.start; }));
    f.push_back(number<double>("sweep_stop", [](C& c) -> double& { return c.sweep.stop; }));
    f.push_back(number<int>("sweep_steps", [](C& c) -> int& { return c.sweep.steps; }));
    return f;
  }();
  return all;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

}  // namespace

std::string apply_setting(ToolkitConfig& config, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (f == nullptr) return "unknown key";
  return f->set(config, value);
}

std::string get_setting(const ToolkitConfig& config, const std::string& key) {
  const Field* f = find_field(key);
  if (f == nullptr) throw ValidationError("unknown config key '" + key + "'");
  return f->get(config);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

ParsedConfig parse_config(const std::string& text) {
  ParsedConfig out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigParseError("line " + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigParseError("line " + std::to_string(number) + ": empty key");
    const std::string message = apply_setting(out.config, key, line.substr(eq + 1));
    if (!message.empty()) out.violations.push_back({key, message});
  }
  for (auto& v : validate_config(out.config)) out.violations.push_back(std::move(v));
  return out;
}

ParsedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<Violation> validate_config(const ToolkitConfig& c) {
  std::vector<Violation> v = geometry_violations(c.geometry);
  auto require = [&v](bool ok, const char* key, const char* message) {
    if (!ok) v.push_back({key, message});
  };
  require(c.voltages.u_ground == 0.0, "voltages_u_ground", "the second aperture is grounded (must be 0)");
  require(c.solver_tolerance >= 0.0, "solver_tolerance", "must be >= 0 (0 selects 1e-6 * max|V|)");
  require(c.solver_max_iterations >= 1, "solver_max_iterations", "must be at least 1");
  require(c.trace.options.dt_max > 0.0, "trace_dt_max", "must be positive");
  require(c.trace.options.step_limit >= 1, "trace_step_limit", "must be at least 1");
  require(c.trace.options.cell_fraction > 0.0 && c.trace.options.cell_fraction <= 1.0, "trace_cell_fraction",
          "must lie in (0, 1]");
  require(c.trace.options.step_energy_tolerance > 0.0, "trace_step_energy_tolerance", "must be positive");
  require(c.trace.options.store_every >= 1, "trace_store_every", "must be at least 1");
  require(c.trace.fan.launch_distance > 0.0, "trace_launch_distance", "must be positive");
  require(c.trace.fan.initial_energy_ev >= 0.0, "trace_initial_energy_ev", "must be >= 0");
  for (double a : c.trace.fan_angles_deg) {
    if (!(a >= 0.0 && a <= 180.0)) {
      v.push_back({"trace_fan_angles_deg", "angles must lie in [0, 180] degrees"});
      break;
    }
  }
  require(c.emission.a > 0.0, "emission_a", "must be positive");
  require(c.emission.b > 0.0, "emission_b", "must be positive");
  require(c.emission.transmission > 0.0 && c.emission.transmission <= 1.0, "emission_transmission",
          "must lie in (0, 1]");
  require(c.beam.u_bp > 0.0, "beam_u_bp", "must be positive");
  require(c.beam.gamma >= 0.0, "beam_gamma", "must be >= 0 (0 selects the default calibration)");
  require(c.beam.magnification >= 0.0, "beam_magnification", "must be >= 0 (0 selects the table)");
  require(c.beam.wavelength >= 0.0, "beam_wavelength", "must be >= 0 (0 computes it from U_SAT)");
  require(c.voltages.u_sat != 0.0, "voltages_u_sat", "must be non-zero for the beam model");
  require(c.fringe.contrast >= 0.0 && c.fringe.contrast <= 1.0, "fringe_contrast", "must lie in [0, 1]");
  require(c.fringe.spacing >= 0.0, "fringe_spacing", "must be >= 0 (0 takes s from the beam model)");
  require(c.fringe.envelope_periods >= 2.0, "fringe_envelope_periods", "must be at least 2");
  require(c.fringe.bins_per_period >= 4, "fringe_bins_per_period", "must be at least 4");
  require(c.fringe.count_threshold > 0.0 && c.fringe.count_threshold < 1.0, "fringe_count_threshold",
          "must lie in (0, 1)");
  require(c.events.rate > 0.0, "events_rate", "must be positive");
  require(c.events.count >= 1, "events_count", "must be at least 1");
  require(c.dephasing.amplitude_pi >= 0.0, "dephasing_amplitude_pi", "must be >= 0");
  require(c.dephasing.frequency > 0.0, "dephasing_frequency", "must be positive");
  require(c.dephasing.grid_min > 0.0, "dephasing_grid_min", "must be positive");
  require(c.dephasing.grid_max >= c.dephasing.grid_min, "dephasing_grid_max", "must be >= dephasing_grid_min");
  require(c.dephasing.grid_step > 0.0, "dephasing_grid_step", "must be positive");
  require(c.wien.plate_length > 0.0, "wien_plate_length", "must be positive");
  require(c.wien.plate_distance > 0.0, "wien_plate_distance", "must be positive");
  require(c.wien.d_wf_qp > 0.0, "wien_d_wf_qp", "must be positive");
  require(c.wien_sweep.l_c > 0.0, "wien_l_c", "must be positive");
  require(c.wien_sweep.c0 > 0.0 && c.wien_sweep.c0 <= 1.0, "wien_c0", "must lie in (0, 1]");
  require(c.wien_sweep.u_max > c.wien_sweep.u_min, "wien_u_max", "must exceed wien_u_min");
  require(c.wien_sweep.steps >= 5, "wien_steps", "must be at least 5");
  require(c.wien_sweep.sigma_contrast >= 0.0, "wien_sigma_contrast", "must be >= 0");
  if (!c.sweep.parameter.empty()) {
    require(find_field(c.sweep.parameter) != nullptr && c.sweep.parameter.rfind("sweep_", 0) != 0, "sweep_parameter",
            "must name a config key outside the sweep_ section");
    require(!c.sweep.values.empty() || c.sweep.steps >= 1, "sweep_steps", "must be at least 1");
  }
  require(c.sweep.steps >= 1, "sweep_steps", "must be at least 1");
  return v;
}

std::string render_config(const ToolkitConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    const std::string prefix = f.key.substr(0, f.key.find('_'));
    if (prefix != section) {
      if (!section.empty()) out += "\n";
      section = prefix;
    }
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

std::vector<double> sweep_values(const SweepConfig& sweep) {
  if (sweep.parameter.empty()) return {};
  if (!sweep.values.empty()) return sweep.values;
  if (sweep.steps <= 1) return {sweep.start};
  std::vector<double> out;
  for (int i = 0; i < sweep.steps; ++i) {
    out.push_back(sweep.start + (sweep.stop - sweep.start) * i / (sweep.steps - 1));
  }
  return out;
}

double biprism_constant(const ToolkitConfig& config) {
  return config.beam.gamma > 0.0 ? config.beam.gamma : default_biprism_constant();
}

BeamParams beam_for(const ToolkitConfig& config) {
  const double gamma = biprism_constant(config);
  const double u_sat = config.voltages.u_sat;
  const double m = config.beam.magnification > 0.0
                       ? config.beam.magnification
                       : default_magnification_table(gamma, config.beam.u_bp).at(u_sat);
  BeamParams beam = make_beam(u_sat, config.beam.u_bp, gamma, m);
  if (config.beam.wavelength > 0.0) {
    beam.wavelength = config.beam.wavelength;
    const auto fs = fringe_spacing(beam);
    beam.s0 = fs.s0;
    beam.s = fs.s;
  }
  return beam;
}

FringeParams pattern_for(const ToolkitConfig& config, const BeamParams& beam) {
  FringeParams p;
  p.i0 = 1.0;
  p.contrast = config.fringe.contrast;
  p.spacing = config.fringe.spacing > 0.0 ? config.fringe.spacing : beam.s;
  p.phi0 = config.fringe.phi0;
  p.envelope_width = config.fringe.envelope_periods * p.spacing;
  p.phi1 = config.fringe.phi1;
  return p;
}

DephasingModel dephasing_for(const ToolkitConfig& config) {
  return {config.dephasing.amplitude_pi * constants::kPi, config.dephasing.frequency, config.dephasing.phase};
}

std::vector<double> frequency_grid(const ToolkitConfig& config) {
  std::vector<double> out;
  const auto& d = config.dephasing;
  const auto n = static_cast<long>(std::floor((d.grid_max - d.grid_min) / d.grid_step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(d.grid_min + static_cast<double>(i) * d.grid_step);
  return out;
}

double events_duration(const ToolkitConfig& config) {
  return static_cast<double>(config.events.count) / config.events.rate;
}

}  // namespace cohsrc
