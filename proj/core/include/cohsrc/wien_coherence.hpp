#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cohsrc/beam_optics.hpp"

namespace cohsrc {

/// B = E / v in tesla for the matched (Wien) condition. DomainError for v <= 0.
double matched_field(double v, double e_field);

/// Wien filter and its distance to the quadrupole. The default lengths are a calibration:
/// together with the default biprism they map a coherence length of 82 nm to U_cl ~ 60 V.
struct WienConfig {
  double plate_length = 20.0e-3;     // L, m
  double plate_distance = 4.0e-3;    // D, m
  double u_wf = 0.0;                 // condensator voltage, V
  double coil_field = 0.0;           // T, informational (matched mode assumed)
  double d_wf_qp = 43.2e-3;          // m
};

/// Delta y = (L / 2D) (Delta x / |U_SAT|) U_WF with Delta x = Theta d_WF_QP, at config.u_wf.
double packet_shift(const WienConfig& config, double u_sat, double theta);
/// Same at an explicit condensator voltage.
double packet_shift(const WienConfig& config, double u_sat, double theta, double u_wf);

/// C0 exp(-dy^2 / (2 sigma_y^2)). DomainError for sigma_y <= 0.
double contrast_envelope(double delta_y, double sigma_y, double c0);

/// sqrt(2 ln 10): ratio of the 10 % half-width to the Gaussian sigma.
double ten_percent_factor();

/// Delta E = 2 |U_SAT| lambda / (pi l_c), in eV.
double energy_width(double u_sat, double wavelength, double l_c);

struct WienPoint {
  double u_wf = 0.0;      // V
  double contrast = 0.0;
  double sigma = 0.0;     // <= 0: unknown
};

struct CoherenceResult {
  double sigma_v = 0.0;        // Gaussian width in U_WF, V
  double sigma_v_err = 0.0;
  double center_v = 0.0;       // fitted centre, V
  double c0 = 0.0;             // peak contrast
  double c0_err = 0.0;
  double u_cl = 0.0;           // V
  double l_c = 0.0;            // m, two-sided distance between the 10 % points
  double l_c_err = 0.0;
  double delta_e = 0.0;        // eV
  double delta_e_err = 0.0;
  double reduced_chi2 = 0.0;
  bool weighted = false;
  bool extrapolated = false;   // fitted centre lies outside the sampled voltages
};

/// Gaussian fit of contrast versus U_WF (inverse-variance weighted when every point carries an
/// uncertainty), then U_cl = sqrt(2 ln 10) sigma, l_c = 2 Delta y(U_cl), Delta E from l_c.
/// PreconditionError for fewer than 5 points; FitError when the fit fails.
CoherenceResult analyze_wien_sweep(std::span<const WienPoint> points, const BeamParams& beam,
                                   const WienConfig& config);

/// True when two results agree within their combined one-sigma error bars.
bool coherence_lengths_consistent(const CoherenceResult& a, const CoherenceResult& b);

struct WienSweepSpec {
  double l_c = 82.0e-9;      // planted coherence length, m
  double c0 = 0.3;
  double center_v = 0.0;
  double u_min = -99.0;
  double u_max = 72.0;
  int steps = 20;
  double sigma_contrast = 0.01;  // reported uncertainty and Gaussian noise level
  bool add_noise = true;
  std::uint64_t seed = 1;
};

/// Contrast samples of a Gaussian envelope whose 10 % points are `spec.l_c` apart.
std::vector<WienPoint> synthesize_wien_sweep(const WienSweepSpec& spec, const BeamParams& beam,
                                             const WienConfig& config);

}  // namespace cohsrc
