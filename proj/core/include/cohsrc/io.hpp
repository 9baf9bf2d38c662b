#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cohsrc/beam_optics.hpp"
#include "cohsrc/emission.hpp"
#include "cohsrc/events_correlation.hpp"
#include "cohsrc/geometry_fields.hpp"
#include "cohsrc/trajectories.hpp"
#include "cohsrc/wien_coherence.hpp"

namespace cohsrc {

/// Numeric CSV with a single header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of the first header matching any of `names`; ValidationError if none does.
  std::size_t column(std::initializer_list<const char*> names) const;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// x_m, r_m, phi_V for every `stride`-th node in each direction.
void write_potential_csv(const std::filesystem::path& path, const PotentialGrid& grid, std::size_t stride = 1);

/// t_s, x_m, r_m, vx_m_per_s, vr_m_per_s, ke_eV.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory);

/// t_ns, x_mm, y_mm.
void write_events_csv(const std::filesystem::path& path, const EventList& events);
/// Reads t_ns, x_mm, y_mm. Without a window the bounding box of the events is used; the duration
/// is the last event time unless given.
EventList read_events_csv(const std::filesystem::path& path, std::optional<DetectorWindow> window = std::nullopt,
                          std::optional<double> duration = std::nullopt);

/// bin_center_m, counts (bin_center is accepted on input).
void write_histogram_csv(const std::filesystem::path& path, const Histogram& histogram);
Histogram read_histogram_csv(const std::filesystem::path& path);

/// u_wf_V, contrast, sigma_contrast.
void write_wien_csv(const std::filesystem::path& path, std::span<const WienPoint> points);
std::vector<WienPoint> read_wien_csv(const std::filesystem::path& path);

/// phi_V, rate_Hz.
void write_fn_points_csv(const std::filesystem::path& path, std::span<const FnPoint> points);
std::vector<FnPoint> read_fn_points_csv(const std::filesystem::path& path);

/// inv_phi_per_V, ln_rate_over_phi2.
void write_fn_plot_csv(const std::filesystem::path& path, std::span<const FnPlotPoint> points);

/// tau_lo_s, tau_hi_s, k, k_sigma, pairs.
void write_g2_csv(const std::filesystem::path& path, std::span<const G2Slice> slices);

}  // namespace cohsrc
