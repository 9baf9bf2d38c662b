#include "cohsrc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cohsrc/errors.hpp"

namespace cohsrc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

void put(std::ofstream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

std::size_t CsvTable::column(std::initializer_list<const char*> names) const {
  for (const char* name : names) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
  }
  throw ValidationError("CSV is missing column '" + std::string(*names.begin()) + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read '" + path.string() + "'");
  CsvTable table;
  std::string line;
  long number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    if (table.header.empty()) {
      table.header = split(line);
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != table.header.size()) {
      throw ValidationError(path.string() + ":" + std::to_string(number) + ": expected " +
                            std::to_string(table.header.size()) + " columns");
    }
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const char* first = cells[i].data();
      const char* last = first + cells[i].size();
      if (first != last && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, row[i]);
      if (ec != std::errc() || ptr != last) {
        throw ValidationError(path.string() + ":" + std::to_string(number) + ": '" + cells[i] + "' is not a number");
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw ValidationError("'" + path.string() + "' has no header");
  return table;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      put(out, row[i]);
    }
    out << '\n';
  }
}

void write_potential_csv(const std::filesystem::path& path, const PotentialGrid& grid, std::size_t stride) {
  stride = std::max<std::size_t>(1, stride);
  const auto& layout = grid.layout();
  const double h = layout.spacing();
  std::vector<std::vector<double>> rows;
  for (std::size_t j = 0; j < layout.nr(); j += stride) {
    for (std::size_t i = 0; i < layout.nx(); i += stride) {
      rows.push_back({static_cast<double>(i) * h, static_cast<double>(j) * h, grid.node(i, j)});
    }
  }
  write_csv(path, {"x_m", "r_m", "phi_V"}, rows);
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory) {
  std::vector<std::vector<double>> rows;
  rows.reserve(trajectory.states.size());
  for (const auto& s : trajectory.states) {
    rows.push_back({s.t, s.position.x, s.position.r, s.velocity.x, s.velocity.r, kinetic_energy_ev(s.velocity)});
  }
  write_csv(path, {"t_s", "x_m", "r_m", "vx_m_per_s", "vr_m_per_s", "ke_eV"}, rows);
}

void write_events_csv(const std::filesystem::path& path, const EventList& events) {
  std::vector<std::vector<double>> rows;
  rows.reserve(events.events.size());
  for (const auto& e : events.events) rows.push_back({e.t * 1e9, e.x * 1e3, e.y * 1e3});
  write_csv(path, {"t_ns", "x_mm", "y_mm"}, rows);
}

EventList read_events_csv(const std::filesystem::path& path, std::optional<DetectorWindow> window,
                          std::optional<double> duration) {
  const CsvTable table = read_csv(path);
  const auto ct = table.column({"t_ns"});
  const auto cx = table.column({"x_mm"});
  const auto cy = table.column({"y_mm"});
  EventList out;
  out.events.reserve(table.rows.size());
  for (const auto& row : table.rows) out.events.push_back({row[ct] * 1e-9, row[cx] * 1e-3, row[cy] * 1e-3});
  std::stable_sort(out.events.begin(), out.events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  if (window) {
    out.window = *window;
  } else if (!out.events.empty()) {
    auto [xmin, xmax] = std::minmax_element(out.events.begin(), out.events.end(),
                                            [](const Event& a, const Event& b) { return a.x < b.x; });
    auto [ymin, ymax] = std::minmax_element(out.events.begin(), out.events.end(),
                                            [](const Event& a, const Event& b) { return a.y < b.y; });
    const double pad_x = 1e-9 * std::max(1.0, xmax->x - xmin->x);
    const double pad_y = 1e-9 * std::max(1.0, ymax->y - ymin->y);
    out.window = {xmin->x, xmax->x + pad_x, ymin->y, ymax->y + pad_y};
  }
  out.duration = duration.value_or(out.events.empty() ? 0.0 : out.events.back().t);
  out.rate = out.mean_rate();
  return out;
}

void write_histogram_csv(const std::filesystem::path& path, const Histogram& histogram) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < histogram.centers.size(); ++i) rows.push_back({histogram.centers[i], histogram.counts[i]});
  write_csv(path, {"bin_center_m", "counts"}, rows);
}

Histogram read_histogram_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const auto cx = table.column({"bin_center_m", "bin_center"});
  const auto cn = table.column({"counts"});
  Histogram h;
  for (const auto& row : table.rows) {
    h.centers.push_back(row[cx]);
    h.counts.push_back(row[cn]);
  }
  return h;
}

void write_wien_csv(const std::filesystem::path& path, std::span<const WienPoint> points) {
  std::vector<std::vector<double>> rows;
  for (const auto& p : points) rows.push_back({p.u_wf, p.contrast, p.sigma});
  write_csv(path, {"u_wf_V", "contrast", "sigma_contrast"}, rows);
}

std::vector<WienPoint> read_wien_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const auto cu = table.column({"u_wf_V"});
  const auto cc = table.column({"contrast"});
  std::optional<std::size_t> cs;
  if (std::find(table.header.begin(), table.header.end(), "sigma_contrast") != table.header.end()) {
    cs = table.column({"sigma_contrast"});
  }
  std::vector<WienPoint> out;
  for (const auto& row : table.rows) out.push_back({row[cu], row[cc], cs ? row[*cs] : 0.0});
  return out;
}

void write_fn_points_csv(const std::filesystem::path& path, std::span<const FnPoint> points) {
  std::vector<std::vector<double>> rows;
  for (const auto& p : points) rows.push_back({p.phi, p.rate});
  write_csv(path, {"phi_V", "rate_Hz"}, rows);
}

std::vector<FnPoint> read_fn_points_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const auto cp = table.column({"phi_V"});
  const auto cr = table.column({"rate_Hz"});
  std::vector<FnPoint> out;
  for (const auto& row : table.rows) out.push_back({row[cp], row[cr]});
  return out;
}

void write_fn_plot_csv(const std::filesystem::path& path, std::span<const FnPlotPoint> points) {
  std::vector<std::vector<double>> rows;
  for (const auto& p : points) rows.push_back({p.inv_phi, p.ln_rate_over_phi2});
  write_csv(path, {"inv_phi_per_V", "ln_rate_over_phi2"}, rows);
}

void write_g2_csv(const std::filesystem::path& path, std::span<const G2Slice> slices) {
  std::vector<std::vector<double>> rows;
  for (const auto& s : slices) rows.push_back({s.tau_lo, s.tau_hi, s.k, s.k_sigma, s.pairs});
  write_csv(path, {"tau_lo_s", "tau_hi_s", "k", "k_sigma", "pairs"}, rows);
}

}  // namespace cohsrc
