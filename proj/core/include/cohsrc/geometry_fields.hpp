#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cohsrc {

/// Point or vector in the meridional (x, r) plane. `r` is signed: negative values
/// address the mirrored half-plane, so trajectories may cross the symmetry axis.
struct Vec2 {
  double x = 0.0;
  double r = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.r + b.r}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.r - b.r}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.r}; }
  friend Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.r}; }
};

double norm(Vec2 v);

using ElectrodeId = std::uint8_t;
inline constexpr ElectrodeId kVacuum = 0;

/// Electrode ids used by the tip / two-aperture source geometry.
namespace electrodes {
inline constexpr ElectrodeId kTip = 1;
inline constexpr ElectrodeId kCounter = 2;         // first aperture, U_c
inline constexpr ElectrodeId kGroundAperture = 3;  // second aperture, 0 V
inline constexpr ElectrodeId kBox = 4;             // grounded cathode-box wall
}  // namespace electrodes

/// Uniform axisymmetric node lattice x_i = i*h, r_j = j*h with a per-node electrode mask.
/// Boundary nodes that are not masked behave as Neumann (mirror) boundaries; r = 0 is
/// always the symmetry axis.
class ElectrodeLayout {
 public:
  ElectrodeLayout(std::size_t nx, std::size_t nr, double spacing,
                  std::vector<std::string> electrode_names);

  std::size_t nx() const noexcept { return nx_; }
  std::size_t nr() const noexcept { return nr_; }
  double spacing() const noexcept { return h_; }
  double length() const noexcept { return h_ * static_cast<double>(nx_ - 1); }
  double radius() const noexcept { return h_ * static_cast<double>(nr_ - 1); }
  std::size_t index(std::size_t i, std::size_t j) const noexcept { return j * nx_ + i; }

  ElectrodeId at(std::size_t i, std::size_t j) const noexcept { return mask_[index(i, j)]; }
  void set(std::size_t i, std::size_t j, ElectrodeId id);
  std::span<const ElectrodeId> mask() const noexcept { return mask_; }

  /// Electrode ids are 1..electrode_count(); id 0 is vacuum.
  std::size_t electrode_count() const noexcept { return names_.size(); }
  const std::string& electrode_name(ElectrodeId id) const;

 private:
  std::size_t nx_;
  std::size_t nr_;
  double h_;
  std::vector<std::string> names_;
  std::vector<ElectrodeId> mask_;
};

/// Tip / counter-electrode / ground-aperture source description. Lengths in metres.
/// The axial positions are estimates read off the published cross section and are
/// meant to be overridden from a config file.
struct GeometryConfig {
  double tip_apex_x = 1.0e-3;
  double tip_radius = 2.0e-6;
  double wire_diameter = 125.0e-6;
  double tip_taper_length = 200.0e-6;  // cone joining the wire to the hemispherical apex
  double aperture1_x = 2.0e-3;         // plate centre planes
  double aperture2_x = 4.5e-3;
  double aperture_hole_diameter = 2.5e-3;
  double aperture_thickness = 0.5e-3;
  double domain_length = 20.0e-3;
  double domain_radius = 4.0e-3;
  double grid_spacing = 25.0e-6;
};

struct Violation {
  std::string key;
  std::string message;
};

/// Every invariant violation of `config`, keyed by its `geometry_*` config key.
std::vector<Violation> geometry_violations(const GeometryConfig& config);

struct ElectrodeVoltages {
  double u_sat = -1600.0;
  double u_c = 200.0;
  double u_ground = 0.0;
};

/// Validated geometry together with its rasterised electrode mask.
class Geometry {
 public:
  Geometry(GeometryConfig config, ElectrodeLayout layout);

  const GeometryConfig& config() const noexcept { return config_; }
  const ElectrodeLayout& layout() const noexcept { return *layout_; }
  std::shared_ptr<const ElectrodeLayout> shared_layout() const noexcept { return layout_; }

  /// Axial position of the last tip node on the axis.
  double apex_node_x() const noexcept;
  /// Launch point just in front of the apex node; the potential there equals U_SAT to ~1e-6 of a cell drop.
  Vec2 apex_launch_point() const noexcept;
  /// Plane past the grounded aperture beyond which an electron counts as transmitted.
  double transmit_plane_x() const noexcept;

  /// Dirichlet value per electrode id (index 0 unused).
  std::vector<double> electrode_voltages(const ElectrodeVoltages& v) const;

 private:
  GeometryConfig config_;
  std::shared_ptr<const ElectrodeLayout> layout_;
};

/// Validates `config` and rasterises the electrodes. Throws ValidationError listing all violations.
Geometry build_geometry(const GeometryConfig& config);

struct SolverOptions {
  /// Error tolerance in volts; <= 0 selects 1e-6 * max |electrode voltage|.
  double tolerance = 0.0;
  long max_iterations = 200000;
  /// Starting values for every node (electrode nodes are overwritten). Empty = midpoint voltage.
  std::vector<double> initial_guess;
};

struct SolveStats {
  long iterations = 0;
  double tolerance = 0.0;
  double max_correction = 0.0;   // last Gauss-Seidel correction, V
  double error_estimate = 0.0;   // max_correction / (1 - rho_SOR)
  double stencil_residual = 0.0; // max |weighted neighbour mean - phi| over vacuum nodes after the solve
  double omega = 1.0;
};

/// Solved potential on an ElectrodeLayout. Immutable once returned by a solver.
class PotentialGrid {
 public:
  PotentialGrid(std::shared_ptr<const ElectrodeLayout> layout, std::vector<double> electrode_voltages,
                std::vector<double> phi, SolveStats stats);

  const ElectrodeLayout& layout() const noexcept { return *layout_; }
  std::shared_ptr<const ElectrodeLayout> shared_layout() const noexcept { return layout_; }
  std::span<const double> values() const noexcept { return phi_; }
  double node(std::size_t i, std::size_t j) const noexcept { return phi_[layout_->index(i, j)]; }
  const std::vector<double>& electrode_voltages() const noexcept { return voltages_; }
  const SolveStats& stats() const noexcept { return stats_; }

  double min_electrode_voltage() const noexcept { return vmin_; }
  double max_electrode_voltage() const noexcept { return vmax_; }
  double max_abs_voltage() const noexcept;

  bool in_domain(Vec2 p) const noexcept;
  /// Electrode owning the cell that contains `p` when all four cell corners are electrode nodes.
  std::optional<ElectrodeId> electrode_at(Vec2 p) const noexcept;

  /// C1 cubic-convolution interpolant of the node potentials; its gradient equals the
  /// central-difference gradient at every node. Unchecked: callers ensure in_domain(p).
  double potential(Vec2 p) const noexcept;
  /// E = -grad(potential), exact gradient of the interpolant.
  Vec2 field(Vec2 p) const noexcept;

 private:
  double ghost(long i, long j) const noexcept;

  std::shared_ptr<const ElectrodeLayout> layout_;
  std::vector<double> voltages_;
  std::vector<double> phi_;
  SolveStats stats_;
  double vmin_ = 0.0;
  double vmax_ = 0.0;
};

/// Red-black SOR with Chebyshev acceleration on the cylindrical five-point stencil.
/// `electrode_voltages[id]` is the Dirichlet value of electrode `id` (index 0 ignored).
/// Throws ConvergenceError if the error estimate does not reach the tolerance.
PotentialGrid solve_laplace(std::shared_ptr<const ElectrodeLayout> layout,
                            std::span<const double> electrode_voltages,
                            const SolverOptions& options = {});

PotentialGrid solve_laplace(const Geometry& geometry, const ElectrodeVoltages& voltages,
                            const SolverOptions& options = {});

/// Field at a vacuum point. Throws DomainError inside an electrode or outside the domain.
Vec2 field_at(const PotentialGrid& grid, Vec2 point);

/// Largest excursion of any vacuum node outside [min, max] electrode voltage (0 when it holds).
double max_principle_violation(const PotentialGrid& grid);

/// Largest cylindrical-stencil residual over vacuum nodes, recomputed from scratch.
double max_stencil_residual(const PotentialGrid& grid);

/// Unit-voltage solutions per electrode. Laplace is linear, so any voltage set is the
/// weighted sum of the basis solutions; used to sweep voltages without re-solving.
class FieldBasis {
 public:
  /// Solves one unit problem per id in `active`; every other electrode is held at 0 V.
  FieldBasis(std::shared_ptr<const ElectrodeLayout> layout, std::vector<ElectrodeId> active,
             const SolverOptions& options = {});

  /// Throws DomainError if a non-active electrode is given a non-zero voltage.
  PotentialGrid combine(std::span<const double> electrode_voltages) const;
  PotentialGrid combine(const Geometry& geometry, const ElectrodeVoltages& voltages) const;

  const std::vector<ElectrodeId>& active() const noexcept { return active_; }

 private:
  std::shared_ptr<const ElectrodeLayout> layout_;
  std::vector<ElectrodeId> active_;
  std::vector<std::vector<double>> unit_solutions_;
  SolveStats stats_;
};

}  // namespace cohsrc
