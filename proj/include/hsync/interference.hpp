#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hsync/errors.hpp"
#include "hsync/random.hpp"

// Beam-splitter stage: Hong-Ou-Mandel interference of two Gaussian
// wavepackets and the CHSH test on the post-selected two-photon state.

namespace hsync {

// ---------------------------------------------------------------------------
// Wavepackets and HOM interference

struct TemporalMode {
  double arrival_offset_ns = 0.0;
  double coherence_fwhm_ns = 25.0;  // FWHM of the time-domain HOM dip
  double frequency_offset_mhz = 0.0;
  double polarization_deg = 0.0;

  // Width parameter of the Gaussian overlap in time.
  double sigma_ns() const { return coherence_fwhm_ns / (4.0 * std::sqrt(std::numbers::ln2)); }
};

// Squared overlap |<m1|m2>|^2 of two transform-limited Gaussian modes:
//   exp(-dt^2 / (4 sigma^2)) * exp(-4 pi^2 dnu^2 sigma^2) * cos^2(dpol).
inline double mode_overlap(const TemporalMode& m1, const TemporalMode& m2) {
  if (!(m1.coherence_fwhm_ns > 0.0) || !(m2.coherence_fwhm_ns > 0.0)) {
    throw DomainError("coherence_fwhm must be > 0");
  }
  if (m1.coherence_fwhm_ns != m2.coherence_fwhm_ns) {
    throw DomainError("modes with unequal coherence widths are not supported");
  }
  const double sigma = m1.sigma_ns();
  const double dt = m1.arrival_offset_ns - m2.arrival_offset_ns;
  const double dnu_ghz = (m1.frequency_offset_mhz - m2.frequency_offset_mhz) * 1e-3;
  const double pol = std::cos((m1.polarization_deg - m2.polarization_deg) * std::numbers::pi / 180.0);
  const double pi = std::numbers::pi;
  return std::exp(-dt * dt / (4.0 * sigma * sigma)) * std::exp(-4.0 * pi * pi * dnu_ghz * dnu_ghz * sigma * sigma) *
         pol * pol;
}

struct HOMResult {
  double c_plat = 0.0;
  double c_dip = 0.0;  // coincidence at the supplied overlap
  double visibility = 0.0;  // depth at full overlap relative to the plateau
};

// Coincidence probability between the two beam-splitter outputs. Source k
// emits one photon with probability p_i_k and two with alpha_k p_i_k^2 / 2.
inline HOMResult hom_coincidence(double alpha1, double alpha2, double p_i1, double p_i2, double overlap) {
  if (!(overlap >= 0.0 && overlap <= 1.0)) throw DomainError("overlap must lie in [0, 1]");
  if (!(alpha1 >= 0.0) || !(alpha2 >= 0.0)) throw DomainError("alpha must be >= 0");
  if (!(p_i1 >= 0.0) || !(p_i2 >= 0.0)) throw DomainError("single-photon probabilities must be >= 0");
  const double p_ii1 = alpha1 * p_i1 * p_i1 / 2.0;
  const double p_ii2 = alpha2 * p_i2 * p_i2 / 2.0;
  const double interfering = p_i1 * p_i2 / 2.0;
  const double c_plat = interfering + (p_ii1 + p_ii2) / 2.0;
  if (!(c_plat > 0.0)) throw DomainError("visibility undefined: plateau coincidence is zero");
  HOMResult r;
  r.c_plat = c_plat;
  r.c_dip = c_plat - overlap * interfering;
  r.visibility = interfering / c_plat;
  return r;
}

enum class ScanDomain { Time, Frequency };

struct HomScanPoint {
  double abscissa;  // delay in ns or detuning in MHz
  double coincidence;
};

struct HomScan {
  ScanDomain domain = ScanDomain::Time;
  std::vector<HomScanPoint> curve;
  double plateau = 0.0;
  double visibility = 0.0;
  double fwhm = 0.0;  // ns or MHz, matching the domain
};

// Overlap of two otherwise identical modes separated by `x` along the scan axis.
inline double scan_overlap(double coherence_fwhm_ns, ScanDomain domain, double x) {
  TemporalMode a{.coherence_fwhm_ns = coherence_fwhm_ns};
  TemporalMode b = a;
  if (domain == ScanDomain::Time) b.arrival_offset_ns = x;
  else b.frequency_offset_mhz = x;
  return mode_overlap(a, b);
}

// FWHM of the dip, from the half-depth crossing of the analytic curve.
// The dip depth is proportional to the overlap, so the half-depth points are
// where the overlap is one half. For the Gaussian mode that is the coherence
// FWHM itself in time, and 4 ln2 / (pi FWHM) in detuning.
inline double hom_dip_fwhm(double coherence_fwhm_ns, ScanDomain domain) {
  if (!(coherence_fwhm_ns > 0.0)) throw DomainError("coherence_fwhm must be > 0");
  if (domain == ScanDomain::Time) return coherence_fwhm_ns;
  return 4.0 * std::numbers::ln2 / (std::numbers::pi * coherence_fwhm_ns) * 1e3;
}

inline HomScan hom_scan(double alpha1, double alpha2, double p_i1, double p_i2, double coherence_fwhm_ns,
                        ScanDomain domain, std::span<const double> grid) {
  if (grid.empty()) throw DomainError("scan grid is empty");
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (grid[k] < grid[k - 1]) throw DomainError("scan grid must be sorted");
  }
  HomScan scan;
  scan.domain = domain;
  scan.curve.reserve(grid.size());
  for (double x : grid) {
    const double o = scan_overlap(coherence_fwhm_ns, domain, x);
    scan.curve.push_back({x, hom_coincidence(alpha1, alpha2, p_i1, p_i2, o).c_dip});
  }
  const HOMResult full = hom_coincidence(alpha1, alpha2, p_i1, p_i2, 1.0);
  scan.plateau = full.c_plat;
  scan.visibility = full.visibility;
  scan.fwhm = hom_dip_fwhm(coherence_fwhm_ns, domain);
  return scan;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t points) {
  std::vector<double> v(points);
  if (points == 1) {
    v[0] = lo;
    return v;
  }
  for (std::size_t k = 0; k < points; ++k) {
    v[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Post-selected two-photon state and CHSH

// Mixture of the singlet with HH (source 1 double emission) and VV (source 2
// double emission) product states.
struct EffectiveTwoPhotonState {
  double w_singlet = 1.0;
  double w_hh = 0.0;
  double w_vv = 0.0;

  double noise() const { return w_hh + w_vv; }
};

inline EffectiveTwoPhotonState effective_state(double alpha1, double alpha2, double p_i1, double p_i2) {
  if (!(alpha1 >= 0.0) || !(alpha2 >= 0.0)) throw DomainError("alpha must be >= 0");
  const double singlet = p_i1 * p_i2 / 2.0;
  const double hh = alpha1 * p_i1 * p_i1 / 4.0;
  const double vv = alpha2 * p_i2 * p_i2 / 4.0;
  const double total = singlet + hh + vv;
  if (!(total > 0.0)) throw DomainError("effective state has zero weight");
  return {singlet / total, hh / total, vv / total};
}

namespace detail {
inline double cos2deg(double deg) { return std::cos(2.0 * deg * std::numbers::pi / 180.0); }
}  // namespace detail

// Polarization correlation E(theta1, theta2), singlet convention
// E = -cos 2(theta1 - theta2).
inline double correlation(const EffectiveTwoPhotonState& s, double theta1_deg, double theta2_deg) {
  return -s.w_singlet * detail::cos2deg(theta1_deg - theta2_deg) +
         s.noise() * detail::cos2deg(theta1_deg) * detail::cos2deg(theta2_deg);
}

// Analyzer settings for S = |E(a, b) - E(a, b') - E(a', b) - E(a', b')|.
struct ChshAngles {
  double a_deg = 0.0;    // theta1
  double ap_deg = 45.0;  // theta1'
  double b_deg = 67.5;   // theta2
  double bp_deg = 22.5;  // theta2'

  // (theta1, theta2) for e11, e12, e21, e22.
  std::array<std::array<double, 2>, 4> settings() const {
    return {{{a_deg, b_deg}, {a_deg, bp_deg}, {ap_deg, b_deg}, {ap_deg, bp_deg}}};
  }
};

struct CHSHResult {
  std::array<double, 4> e{};
  std::array<double, 4> sigma_e{};
  double s = 0.0;
  double sigma_s = 0.0;
  double n_sigma = 0.0;  // NaN without uncertainties
};

inline CHSHResult chsh_from_correlations(const std::array<double, 4>& e,
                                         const std::optional<std::array<double, 4>>& sigmas = std::nullopt) {
  for (double x : e) {
    if (!(std::abs(x) <= 1.0)) throw DomainError("correlation outside [-1, 1]: " + std::to_string(x));
  }
  CHSHResult r;
  r.e = e;
  r.s = std::abs(e[0] - e[1] - e[2] - e[3]);
  if (sigmas) {
    r.sigma_e = *sigmas;
    double var = 0.0;
    for (double s : *sigmas) var += s * s;
    r.sigma_s = std::sqrt(var);
    r.n_sigma = (r.s - 2.0) / r.sigma_s;
  } else {
    r.n_sigma = std::nan("");
  }
  return r;
}

inline CHSHResult chsh_for_state(const EffectiveTwoPhotonState& state, const ChshAngles& angles = {}) {
  std::array<double, 4> e{};
  const auto set = angles.settings();
  for (std::size_t k = 0; k < 4; ++k) e[k] = correlation(state, set[k][0], set[k][1]);
  return chsh_from_correlations(e);
}

// Model S at the optimal analyzer angles for two sources of equal quality.
inline double predicted_S(double alpha_bar) {
  if (!(alpha_bar >= 0.0)) throw DomainError("alpha must be >= 0");
  return (2.0 * std::numbers::sqrt2 - std::numbers::sqrt2 * alpha_bar) / (1.0 + alpha_bar);
}

// Largest alpha that still violates S <= 2.
inline double violation_threshold_alpha() {
  return (2.0 * std::numbers::sqrt2 - 2.0) / (2.0 + std::numbers::sqrt2);
}

// Outcome probabilities (++, +-, -+, --) of the two polarization analyzers.
inline std::array<double, 4> joint_probabilities(const EffectiveTwoPhotonState& s, double theta1_deg,
                                                 double theta2_deg) {
  const double rad = std::numbers::pi / 180.0;
  const double d = (theta1_deg - theta2_deg) * rad;
  const double same = 0.5 * std::sin(d) * std::sin(d);
  const double diff = 0.5 * std::cos(d) * std::cos(d);
  const double c1 = std::cos(theta1_deg * rad), s1 = std::sin(theta1_deg * rad);
  const double c2 = std::cos(theta2_deg * rad), s2 = std::sin(theta2_deg * rad);
  // HH passes '+' at angle theta with cos^2 theta; VV with sin^2 theta.
  const double hh_pp = c1 * c1 * c2 * c2, hh_pm = c1 * c1 * s2 * s2;
  const double hh_mp = s1 * s1 * c2 * c2, hh_mm = s1 * s1 * s2 * s2;
  return {s.w_singlet * same + s.w_hh * hh_pp + s.w_vv * hh_mm,
          s.w_singlet * diff + s.w_hh * hh_pm + s.w_vv * hh_mp,
          s.w_singlet * diff + s.w_hh * hh_mp + s.w_vv * hh_pm,
          s.w_singlet * same + s.w_hh * hh_mm + s.w_vv * hh_pp};
}

struct SettingCounts {
  double theta1_deg = 0.0, theta2_deg = 0.0;
  std::uint64_t n_pp = 0, n_pm = 0, n_mp = 0, n_mm = 0;

  std::uint64_t total() const { return n_pp + n_pm + n_mp + n_mm; }

  double correlation() const {
    const auto n = static_cast<double>(total());
    return (static_cast<double>(n_pp + n_mm) - static_cast<double>(n_pm + n_mp)) / n;
  }

  double sigma() const {
    const double e = correlation();
    return std::sqrt((1.0 - e * e) / static_cast<double>(total()));
  }
};

struct ChshSample {
  std::array<SettingCounts, 4> counts;
  CHSHResult result;
};

inline CHSHResult chsh_from_counts(const std::array<SettingCounts, 4>& counts) {
  std::array<double, 4> e{}, sigma{};
  for (std::size_t k = 0; k < 4; ++k) {
    e[k] = counts[k].correlation();
    sigma[k] = counts[k].sigma();
  }
  return chsh_from_correlations(e, sigma);
}

// Draws n_events outcome pairs per setting; setting k uses substream (seed, k).
inline ChshSample sample_chsh_experiment(const EffectiveTwoPhotonState& state, const ChshAngles& angles,
                                         std::uint64_t n_events_per_setting, std::uint64_t seed) {
  if (n_events_per_setting == 0) throw DomainError("n_events_per_setting must be >= 1");
  ChshSample out;
  const auto set = angles.settings();
  for (std::size_t k = 0; k < 4; ++k) {
    const auto p = joint_probabilities(state, set[k][0], set[k][1]);
    const double c0 = p[0], c1 = c0 + p[1], c2 = c1 + p[2];
    SettingCounts& c = out.counts[k];
    c.theta1_deg = set[k][0];
    c.theta2_deg = set[k][1];
    SplitMix64 rng = substream(seed, streams::chsh_setting, k);
    std::array<std::uint64_t, 4> n{};
    for (std::uint64_t ev = 0; ev < n_events_per_setting; ++ev) {
      const double u = rng.uniform();
      // Zero-probability outcomes are never drawn.
      const std::size_t bin = u < c0 ? 0 : u < c1 ? 1 : u < c2 ? 2 : 3;
      ++n[bin];
    }
    c.n_pp = n[0];
    c.n_pm = n[1];
    c.n_mp = n[2];
    c.n_mm = n[3];
  }
  out.result = chsh_from_counts(out.counts);
  return out;
}

}  // namespace hsync
