#include "cohsrc/geometry_fields.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "cohsrc/errors.hpp"
#include "cohsrc/physics_constants.hpp"

namespace cohsrc {

double norm(Vec2 v) { return std::hypot(v.x, v.r); }

// ---------------------------------------------------------------------------
// ElectrodeLayout

ElectrodeLayout::ElectrodeLayout(std::size_t nx, std::size_t nr, double spacing,
                                 std::vector<std::string> electrode_names)
    : nx_(nx), nr_(nr), h_(spacing), names_(std::move(electrode_names)), mask_(nx * nr, kVacuum) {
  if (nx < 4 || nr < 4) throw ValidationError("electrode layout needs at least 4x4 nodes");
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw ValidationError("grid spacing must be positive");
  if (names_.size() > 250) throw ValidationError("too many electrodes");
}

void ElectrodeLayout::set(std::size_t i, std::size_t j, ElectrodeId id) {
  if (i >= nx_ || j >= nr_) throw DomainError("node index outside the layout");
  if (id > names_.size()) throw DomainError("unknown electrode id");
  mask_[index(i, j)] = id;
}

const std::string& ElectrodeLayout::electrode_name(ElectrodeId id) const {
  static const std::string vacuum = "vacuum";
  if (id == kVacuum) return vacuum;
  if (id > names_.size()) throw DomainError("unknown electrode id");
  return names_[id - 1];
}

// ---------------------------------------------------------------------------
// Geometry

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

struct TipShape {
  double apex_x, tip_radius, wire_radius, taper;

  bool contains(double x, double r, double eps) const {
    if (x > apex_x + eps) return false;
    const double cap_center = apex_x - tip_radius;
    if (x >= cap_center) {
      const double dx = x - cap_center;
      return dx * dx + r * r <= (tip_radius + eps) * (tip_radius + eps);
    }
    if (x >= cap_center - taper) {
      const double radius = tip_radius + (wire_radius - tip_radius) * (cap_center - x) / taper;
      return r <= radius + eps;
    }
    return r <= wire_radius + eps;
  }
};

}  // namespace

std::vector<Violation> geometry_violations(const GeometryConfig& c) {
  std::vector<Violation> out;
  auto require_positive = [&](const char* key, double v) {
    if (!positive_finite(v)) {
      out.push_back({key, "must be a finite, strictly positive length"});
      return false;
    }
    return true;
  };

  const bool apex_ok = require_positive("geometry_tip_apex_x", c.tip_apex_x);
  const bool tip_ok = require_positive("geometry_tip_radius", c.tip_radius);
  const bool wire_ok = require_positive("geometry_wire_diameter", c.wire_diameter);
  const bool taper_ok = require_positive("geometry_tip_taper_length", c.tip_taper_length);
  const bool a1_ok = require_positive("geometry_aperture1_x", c.aperture1_x);
  const bool a2_ok = require_positive("geometry_aperture2_x", c.aperture2_x);
  const bool hole_ok = require_positive("geometry_aperture_hole_diameter", c.aperture_hole_diameter);
  const bool thick_ok = require_positive("geometry_aperture_thickness", c.aperture_thickness);
  const bool len_ok = require_positive("geometry_domain_length", c.domain_length);
  const bool rad_ok = require_positive("geometry_domain_radius", c.domain_radius);
  const bool h_ok = require_positive("geometry_grid_spacing", c.grid_spacing);
  (void)taper_ok;

  const double h = c.grid_spacing;
  bool resolution_ok = h_ok;
  if (h_ok && hole_ok && h > c.aperture_hole_diameter / 10.0 * (1.0 + 1e-12)) {
    out.push_back({"geometry_grid_spacing", "must resolve the aperture hole: h <= aperture_hole_diameter / 10"});
    resolution_ok = false;
  }
  if (tip_ok && wire_ok && c.tip_radius > c.wire_diameter / 2.0) {
    out.push_back({"geometry_tip_radius", "tip radius exceeds the wire radius"});
  }

  bool ordered = true;
  if (apex_ok && a1_ok && !(c.tip_apex_x < c.aperture1_x)) {
    out.push_back({"geometry_aperture1_x", "axial ordering requires tip_apex_x < aperture1_x"});
    ordered = false;
  }
  if (a1_ok && a2_ok && !(c.aperture1_x < c.aperture2_x)) {
    out.push_back({"geometry_aperture2_x", "axial ordering requires aperture1_x < aperture2_x"});
    ordered = false;
  }
  if (a2_ok && len_ok && !(c.aperture2_x < c.domain_length)) {
    out.push_back({"geometry_domain_length", "axial ordering requires aperture2_x < domain_length"});
    ordered = false;
  }

  if (resolution_ok && thick_ok && c.aperture_thickness < 2.0 * h) {
    out.push_back({"geometry_aperture_thickness", "apertures must span at least two grid cells (thickness >= 2h)"});
  }
  if (ordered && h_ok && thick_ok && apex_ok && a1_ok && a2_ok && len_ok) {
    const double half_t = c.aperture_thickness / 2.0;
    if (c.tip_apex_x + h >= c.aperture1_x - half_t) {
      out.push_back({"geometry_tip_apex_x", "tip overlaps the counter electrode"});
    }
    if (c.aperture1_x + half_t + h >= c.aperture2_x - half_t) {
      out.push_back({"geometry_aperture2_x", "second aperture overlaps the counter electrode"});
    }
    if (c.aperture2_x + half_t + 4.0 * h >= c.domain_length) {
      out.push_back({"geometry_domain_length", "no drift region behind the grounded aperture"});
    }
  }
  if (rad_ok && h_ok && hole_ok && c.aperture_hole_diameter / 2.0 + 2.0 * h >= c.domain_radius) {
    out.push_back({"geometry_domain_radius", "aperture hole does not fit inside the domain"});
  }
  if (rad_ok && h_ok && wire_ok && c.wire_diameter / 2.0 + h >= c.domain_radius) {
    out.push_back({"geometry_wire_diameter", "wire does not fit inside the domain"});
  }
  if (h_ok && len_ok && rad_ok) {
    const double nodes = (c.domain_length / h + 1.0) * (c.domain_radius / h + 1.0);
    if (nodes > 5.0e7) out.push_back({"geometry_grid_spacing", "grid exceeds 5e7 nodes"});
  }
  return out;
}

Geometry::Geometry(GeometryConfig config, ElectrodeLayout layout)
    : config_(config), layout_(std::make_shared<const ElectrodeLayout>(std::move(layout))) {}

double Geometry::apex_node_x() const noexcept {
  const double h = layout_->spacing();
  return std::floor(config_.tip_apex_x / h + 1e-9) * h;
}

Vec2 Geometry::apex_launch_point() const noexcept {
  return {apex_node_x() + 1e-6 * layout_->spacing(), 0.0};
}

double Geometry::transmit_plane_x() const noexcept {
  return layout_->length() - 2.0 * layout_->spacing();
}

std::vector<double> Geometry::electrode_voltages(const ElectrodeVoltages& v) const {
  std::vector<double> out(5, 0.0);
  out[electrodes::kTip] = v.u_sat;
  out[electrodes::kCounter] = v.u_c;
  out[electrodes::kGroundAperture] = v.u_ground;
  out[electrodes::kBox] = 0.0;
  return out;
}

Geometry build_geometry(const GeometryConfig& config) {
  const auto violations = geometry_violations(config);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "invalid geometry:";
    for (const auto& v : violations) msg << "\n  " << v.key << ": " << v.message;
    throw ValidationError(msg.str());
  }

  const double h = config.grid_spacing;
  const auto nx = static_cast<std::size_t>(std::llround(config.domain_length / h)) + 1;
  const auto nr = static_cast<std::size_t>(std::llround(config.domain_radius / h)) + 1;
  ElectrodeLayout layout(nx, nr, h, {"tip", "counter", "ground_aperture", "box"});

  const TipShape tip{config.tip_apex_x, config.tip_radius, config.wire_diameter / 2.0,
                     config.tip_taper_length};
  const double eps = 1e-9 * h;
  const double half_t = config.aperture_thickness / 2.0;
  const double hole_r = config.aperture_hole_diameter / 2.0;

  for (std::size_t j = 0; j < nr; ++j) {
    const double r = static_cast<double>(j) * h;
    for (std::size_t i = 0; i < nx; ++i) {
      const double x = static_cast<double>(i) * h;
      ElectrodeId id = kVacuum;
      if (i == 0 || i == nx - 1 || j == nr - 1) id = electrodes::kBox;
      if (j < nr - 1 && r >= hole_r - eps) {
        if (std::abs(x - config.aperture1_x) <= half_t + eps) id = electrodes::kCounter;
        if (std::abs(x - config.aperture2_x) <= half_t + eps) id = electrodes::kGroundAperture;
      }
      if (j < nr - 1 && tip.contains(x, r, eps)) id = electrodes::kTip;
      if (id != kVacuum) layout.set(i, j, id);
    }
  }
  return Geometry(config, std::move(layout));
}

// ---------------------------------------------------------------------------
// PotentialGrid

PotentialGrid::PotentialGrid(std::shared_ptr<const ElectrodeLayout> layout,
                             std::vector<double> electrode_voltages, std::vector<double> phi,
                             SolveStats stats)
    : layout_(std::move(layout)), voltages_(std::move(electrode_voltages)), phi_(std::move(phi)),
      stats_(stats) {
  if (phi_.size() != layout_->nx() * layout_->nr()) throw DomainError("potential array size mismatch");
  vmin_ = std::numeric_limits<double>::infinity();
  vmax_ = -std::numeric_limits<double>::infinity();
  for (ElectrodeId id : layout_->mask()) {
    if (id == kVacuum) continue;
    vmin_ = std::min(vmin_, voltages_.at(id));
    vmax_ = std::max(vmax_, voltages_.at(id));
  }
  if (!std::isfinite(vmin_)) vmin_ = vmax_ = 0.0;
}

double PotentialGrid::max_abs_voltage() const noexcept { return std::max(std::abs(vmin_), std::abs(vmax_)); }

bool PotentialGrid::in_domain(Vec2 p) const noexcept {
  return p.x >= 0.0 && p.x <= layout_->length() && std::abs(p.r) <= layout_->radius() &&
         std::isfinite(p.x) && std::isfinite(p.r);
}

namespace {

struct CellCoord {
  long i;
  double f;
};

CellCoord locate(double u, std::size_t n) {
  long i = static_cast<long>(std::floor(u));
  i = std::clamp(i, 0L, static_cast<long>(n) - 2);
  const double f = std::clamp(u - static_cast<double>(i), 0.0, 1.0);
  return {i, f};
}

// Keys cubic convolution kernel (a = -1/2) for nodes at offsets -1, 0, 1, 2.
void cubic_weights(double f, std::array<double, 4>& w, std::array<double, 4>& dw) {
  const double f2 = f * f;
  const double f3 = f2 * f;
  w = {0.5 * (-f3 + 2.0 * f2 - f), 0.5 * (3.0 * f3 - 5.0 * f2 + 2.0), 0.5 * (-3.0 * f3 + 4.0 * f2 + f),
       0.5 * (f3 - f2)};
  dw = {0.5 * (-3.0 * f2 + 4.0 * f - 1.0), 0.5 * (9.0 * f2 - 10.0 * f), 0.5 * (-9.0 * f2 + 8.0 * f + 1.0),
        0.5 * (3.0 * f2 - 2.0 * f)};
}

}  // namespace

double PotentialGrid::ghost(long i, long j) const noexcept {
  const long nx = static_cast<long>(layout_->nx());
  const long nr = static_cast<long>(layout_->nr());
  if (j < 0) j = -j;
  if (j >= nr) {
    const long jb = nr - 1;
    const long ic = std::clamp(i, 0L, nx - 1);
    if (layout_->at(static_cast<std::size_t>(ic), static_cast<std::size_t>(jb)) != kVacuum) {
      return 2.0 * ghost(i, jb) - ghost(i, jb - 1);
    }
    return ghost(i, 2 * jb - j);
  }
  if (i < 0 || i >= nx) {
    const long ib = i < 0 ? 0 : nx - 1;
    const long step = i < 0 ? 1 : -1;
    const double boundary = phi_[layout_->index(static_cast<std::size_t>(ib), static_cast<std::size_t>(j))];
    const double inner = phi_[layout_->index(static_cast<std::size_t>(ib + step), static_cast<std::size_t>(j))];
    if (layout_->at(static_cast<std::size_t>(ib), static_cast<std::size_t>(j)) != kVacuum) {
      return 2.0 * boundary - inner;
    }
    return inner;
  }
  return phi_[layout_->index(static_cast<std::size_t>(i), static_cast<std::size_t>(j))];
}

double PotentialGrid::potential(Vec2 p) const noexcept {
  const double h = layout_->spacing();
  const CellCoord cx = locate(p.x / h, layout_->nx());
  const CellCoord cr = locate(std::abs(p.r) / h, layout_->nr());
  std::array<double, 4> wx, dwx, wr, dwr;
  cubic_weights(cx.f, wx, dwx);
  cubic_weights(cr.f, wr, dwr);
  double sum = 0.0;
  for (int b = 0; b < 4; ++b) {
    double row = 0.0;
    for (int a = 0; a < 4; ++a) row += wx[a] * ghost(cx.i - 1 + a, cr.i - 1 + b);
    sum += wr[b] * row;
  }
  return sum;
}

Vec2 PotentialGrid::field(Vec2 p) const noexcept {
  const double h = layout_->spacing();
  const CellCoord cx = locate(p.x / h, layout_->nx());
  const CellCoord cr = locate(std::abs(p.r) / h, layout_->nr());
  std::array<double, 4> wx, dwx, wr, dwr;
  cubic_weights(cx.f, wx, dwx);
  cubic_weights(cr.f, wr, dwr);

  const long nx = static_cast<long>(layout_->nx());
  const long nr = static_cast<long>(layout_->nr());
  double gx = 0.0;
  double gr = 0.0;
  if (cx.i >= 1 && cx.i + 2 < nx && cr.i >= 1 && cr.i + 2 < nr) {
    const std::size_t stride = layout_->nx();
    const double* base = &phi_[layout_->index(static_cast<std::size_t>(cx.i - 1), static_cast<std::size_t>(cr.i - 1))];
    for (int b = 0; b < 4; ++b) {
      const double* row = base + static_cast<std::size_t>(b) * stride;
      double vx = 0.0;
      double vr = 0.0;
      for (int a = 0; a < 4; ++a) {
        vx += dwx[a] * row[a];
        vr += wx[a] * row[a];
      }
      gx += wr[b] * vx;
      gr += dwr[b] * vr;
    }
  } else {
    for (int b = 0; b < 4; ++b) {
      double vx = 0.0;
      double vr = 0.0;
      for (int a = 0; a < 4; ++a) {
        const double v = ghost(cx.i - 1 + a, cr.i - 1 + b);
        vx += dwx[a] * v;
        vr += wx[a] * v;
      }
      gx += wr[b] * vx;
      gr += dwr[b] * vr;
    }
  }
  const double sign = p.r < 0.0 ? -1.0 : 1.0;
  return {-gx / h, -sign * gr / h};
}

std::optional<ElectrodeId> PotentialGrid::electrode_at(Vec2 p) const noexcept {
  if (!in_domain(p)) return std::nullopt;
  const double h = layout_->spacing();
  const CellCoord cx = locate(p.x / h, layout_->nx());
  const CellCoord cr = locate(std::abs(p.r) / h, layout_->nr());
  const auto i = static_cast<std::size_t>(cx.i);
  const auto j = static_cast<std::size_t>(cr.i);
  const ElectrodeId c00 = layout_->at(i, j);
  const ElectrodeId c10 = layout_->at(i + 1, j);
  const ElectrodeId c01 = layout_->at(i, j + 1);
  const ElectrodeId c11 = layout_->at(i + 1, j + 1);
  if (c00 == kVacuum || c10 == kVacuum || c01 == kVacuum || c11 == kVacuum) return std::nullopt;
  const bool right = cx.f >= 0.5;
  const bool up = cr.f >= 0.5;
  if (right) return up ? c11 : c10;
  return up ? c01 : c00;
}

// ---------------------------------------------------------------------------
// Solver

namespace {

// One Gauss-Seidel evaluation of the cylindrical five-point stencil at vacuum node (i, j).
// On the axis the r -> 0 limit phi_xx + 2 phi_rr is used; unmasked faces mirror.
inline double stencil_mean(const double* phi, std::size_t i, std::size_t j, std::size_t nx,
                           std::size_t nr, const double* radial_c) {
  const std::size_t idx = j * nx + i;
  const double east = i + 1 < nx ? phi[idx + 1] : phi[idx - 1];
  const double west = i > 0 ? phi[idx - 1] : phi[idx + 1];
  if (j == 0) {
    return (east + west + 4.0 * phi[idx + nx]) / 6.0;
  }
  const double up = j + 1 < nr ? phi[idx + nx] : phi[idx - nx];
  const double down = phi[idx - nx];
  const double c = radial_c[j];
  return 0.25 * (east + west + (1.0 + c) * up + (1.0 - c) * down);
}

std::vector<double> radial_coefficients(std::size_t nr) {
  std::vector<double> c(nr, 0.0);
  for (std::size_t j = 1; j < nr; ++j) c[j] = 1.0 / (2.0 * static_cast<double>(j));
  return c;
}

double stencil_residual(const ElectrodeLayout& layout, std::span<const double> values) {
  const std::size_t nx = layout.nx();
  const std::size_t nr = layout.nr();
  const std::vector<double> radial_c = radial_coefficients(nr);
  const auto mask = layout.mask();
  const double* phi = values.data();
  double worst = 0.0;
  for (std::size_t j = 0; j < nr; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t idx = j * nx + i;
      if (mask[idx] != kVacuum) continue;
      worst = std::max(worst, std::abs(stencil_mean(phi, i, j, nx, nr, radial_c.data()) - phi[idx]));
    }
  }
  return worst;
}

}  // namespace

PotentialGrid solve_laplace(std::shared_ptr<const ElectrodeLayout> layout_ptr,
                            std::span<const double> electrode_voltages, const SolverOptions& options) {
  const ElectrodeLayout& layout = *layout_ptr;
  const std::size_t nx = layout.nx();
  const std::size_t nr = layout.nr();
  if (electrode_voltages.size() < layout.electrode_count() + 1) {
    throw DomainError("one voltage per electrode id (plus unused slot 0) is required");
  }
  std::vector<double> voltages(electrode_voltages.begin(), electrode_voltages.end());

  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -std::numeric_limits<double>::infinity();
  bool any_electrode = false;
  for (ElectrodeId id : layout.mask()) {
    if (id == kVacuum) continue;
    any_electrode = true;
    if (!std::isfinite(voltages[id])) throw DomainError("electrode voltages must be finite");
    vmin = std::min(vmin, voltages[id]);
    vmax = std::max(vmax, voltages[id]);
  }
  if (!any_electrode) throw ValidationError("layout has no electrode nodes; the problem is singular");

  const double vscale = std::max(std::abs(vmin), std::abs(vmax));
  double tol = options.tolerance;
  if (!(tol > 0.0)) tol = vscale > 0.0 ? 1e-6 * vscale : 1e-6;

  std::vector<double> phi;
  if (!options.initial_guess.empty()) {
    if (options.initial_guess.size() != nx * nr) throw DomainError("initial guess size mismatch");
    phi = options.initial_guess;
  } else {
    phi.assign(nx * nr, 0.5 * (vmin + vmax));
  }
  const auto mask = layout.mask();
  for (std::size_t k = 0; k < phi.size(); ++k) {
    if (mask[k] != kVacuum) phi[k] = voltages[mask[k]];
  }

  const std::vector<double> radial_c = radial_coefficients(nr);
  const double pi = constants::kPi;
  const double rho = 0.5 * (std::cos(pi / static_cast<double>(nx - 1)) +
                            std::cos(pi / (2.0 * static_cast<double>(nr - 1))));
  const double omega_opt = 2.0 / (1.0 + std::sqrt(1.0 - rho * rho));

  SolveStats stats;
  stats.tolerance = tol;
  double omega = 1.0;
  bool first_half = true;
  constexpr std::size_t kWindow = 20;
  std::vector<double> history(kWindow, 0.0);
  for (long iter = 1; iter <= options.max_iterations; ++iter) {
    double max_corr = 0.0;
    double omega_used = omega;
    for (int color = 0; color < 2; ++color) {
      for (std::size_t j = 0; j < nr; ++j) {
        for (std::size_t i = (j + static_cast<std::size_t>(color)) % 2; i < nx; i += 2) {
          const std::size_t idx = j * nx + i;
          if (mask[idx] != kVacuum) continue;
          const double corr = stencil_mean(phi.data(), i, j, nx, nr, radial_c.data()) - phi[idx];
          max_corr = std::max(max_corr, std::abs(corr));
          phi[idx] += omega * corr;
        }
      }
      omega_used = std::max(omega_used, omega);
      // Chebyshev acceleration of the over-relaxation factor.
      if (first_half) {
        omega = 1.0 / (1.0 - 0.5 * rho * rho);
        first_half = false;
      } else {
        omega = 1.0 / (1.0 - 0.25 * rho * rho * omega);
      }
    }
    // Contraction per sweep: the larger of the model value and the rate observed over the last kWindow sweeps.
    double q = omega_opt - 1.0;
    const double oldest = history[static_cast<std::size_t>(iter) % kWindow];
    if (iter <= static_cast<long>(kWindow)) {
      q = 1.0;
    } else if (max_corr > 0.0) {
      q = std::max(q, std::pow(max_corr / oldest, 1.0 / static_cast<double>(kWindow)));
    }
    history[static_cast<std::size_t>(iter) % kWindow] = max_corr;
    const double error_estimate =
        max_corr == 0.0 ? 0.0 : q < 1.0 ? omega_used * max_corr / (1.0 - q) : std::numeric_limits<double>::infinity();
    stats.iterations = iter;
    stats.max_correction = max_corr;
    stats.error_estimate = error_estimate;
    stats.omega = omega;
    if (error_estimate <= tol) {
      for (std::size_t k = 0; k < phi.size(); ++k) {
        if (mask[k] == kVacuum) phi[k] = std::clamp(phi[k], vmin, vmax);
      }
      stats.stencil_residual = stencil_residual(layout, phi);
      return PotentialGrid(std::move(layout_ptr), std::move(voltages), std::move(phi), stats);
    }
  }
  std::ostringstream msg;
  msg << "Laplace solve did not converge in " << options.max_iterations
      << " iterations (error estimate " << stats.error_estimate << " V, tolerance " << tol << " V)";
  throw ConvergenceError(msg.str(), stats.error_estimate, stats.iterations);
}

PotentialGrid solve_laplace(const Geometry& geometry, const ElectrodeVoltages& voltages,
                            const SolverOptions& options) {
  if (voltages.u_ground != 0.0) throw DomainError("the second aperture is grounded: u_ground must be 0");
  if (!std::isfinite(voltages.u_sat) || !std::isfinite(voltages.u_c)) {
    throw DomainError("electrode voltages must be finite");
  }
  const auto v = geometry.electrode_voltages(voltages);
  return solve_laplace(geometry.shared_layout(), v, options);
}

Vec2 field_at(const PotentialGrid& grid, Vec2 point) {
  if (!grid.in_domain(point)) throw DomainError("point lies outside the solved domain");
  if (grid.electrode_at(point)) throw DomainError("point lies inside an electrode");
  return grid.field(point);
}

double max_principle_violation(const PotentialGrid& grid) {
  const auto mask = grid.layout().mask();
  const auto phi = grid.values();
  double worst = 0.0;
  for (std::size_t k = 0; k < phi.size(); ++k) {
    if (mask[k] != kVacuum) continue;
    worst = std::max(worst, grid.min_electrode_voltage() - phi[k]);
    worst = std::max(worst, phi[k] - grid.max_electrode_voltage());
  }
  return worst;
}

double max_stencil_residual(const PotentialGrid& grid) {
  return stencil_residual(grid.layout(), grid.values());
}

// ---------------------------------------------------------------------------
// FieldBasis

FieldBasis::FieldBasis(std::shared_ptr<const ElectrodeLayout> layout, std::vector<ElectrodeId> active,
                       const SolverOptions& options)
    : layout_(std::move(layout)), active_(std::move(active)) {
  SolverOptions unit_options = options;
  if (!(unit_options.tolerance > 0.0)) unit_options.tolerance = 1e-6;
  for (ElectrodeId id : active_) {
    if (id == kVacuum || id > layout_->electrode_count()) throw DomainError("unknown electrode id in basis");
    std::vector<double> v(layout_->electrode_count() + 1, 0.0);
    v[id] = 1.0;
    PotentialGrid unit = solve_laplace(layout_, v, unit_options);
    unit_solutions_.emplace_back(unit.values().begin(), unit.values().end());
    stats_.iterations += unit.stats().iterations;
    stats_.tolerance = unit_options.tolerance;
    stats_.error_estimate = std::max(stats_.error_estimate, unit.stats().error_estimate);
  }
}

PotentialGrid FieldBasis::combine(std::span<const double> electrode_voltages) const {
  if (electrode_voltages.size() < layout_->electrode_count() + 1) {
    throw DomainError("one voltage per electrode id (plus unused slot 0) is required");
  }
  for (std::size_t id = 1; id <= layout_->electrode_count(); ++id) {
    const bool is_active = std::find(active_.begin(), active_.end(), static_cast<ElectrodeId>(id)) != active_.end();
    if (!is_active && electrode_voltages[id] != 0.0) {
      throw DomainError("electrode '" + layout_->electrode_name(static_cast<ElectrodeId>(id)) +
                        "' is not part of the basis and must stay at 0 V");
    }
  }
  std::vector<double> phi(layout_->nx() * layout_->nr(), 0.0);
  double scale = 0.0;
  for (std::size_t k = 0; k < active_.size(); ++k) {
    const double v = electrode_voltages[active_[k]];
    scale += std::abs(v);
    const auto& unit = unit_solutions_[k];
    for (std::size_t n = 0; n < phi.size(); ++n) phi[n] += v * unit[n];
  }
  std::vector<double> voltages(electrode_voltages.begin(), electrode_voltages.end());
  const auto mask = layout_->mask();
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -std::numeric_limits<double>::infinity();
  for (ElectrodeId id : mask) {
    if (id == kVacuum) continue;
    vmin = std::min(vmin, voltages[id]);
    vmax = std::max(vmax, voltages[id]);
  }
  for (std::size_t n = 0; n < phi.size(); ++n) {
    phi[n] = mask[n] != kVacuum ? voltages[mask[n]] : std::clamp(phi[n], vmin, vmax);
  }
  SolveStats stats = stats_;
  stats.tolerance = stats_.tolerance * scale;
  stats.error_estimate = stats_.error_estimate * scale;
  stats.stencil_residual = stencil_residual(*layout_, phi);
  return PotentialGrid(layout_, std::move(voltages), std::move(phi), stats);
}

PotentialGrid FieldBasis::combine(const Geometry& geometry, const ElectrodeVoltages& voltages) const {
  if (voltages.u_ground != 0.0) throw DomainError("the second aperture is grounded: u_ground must be 0");
  const auto v = geometry.electrode_voltages(voltages);
  return combine(v);
}

}  // namespace cohsrc
