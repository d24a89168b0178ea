#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include "hsync/errors.hpp"

// Number statistics of the write / herald / read chain of one atomic
// ensemble. Fock space is truncated at two quanta; the neglected terms are
// O(chi^{3/2}).

namespace hsync {

inline constexpr std::size_t kMaxQuanta = 2;

struct FockDistribution {
  std::array<double, kMaxQuanta + 1> p{1.0, 0.0, 0.0};

  double operator[](std::size_t n) const { return p[n]; }
  double& operator[](std::size_t n) { return p[n]; }

  double total() const { return p[0] + p[1] + p[2]; }

  // Mean number of quanta.
  double mean() const { return p[1] + 2.0 * p[2]; }

  friend bool operator==(const FockDistribution&, const FockDistribution&) = default;
};

namespace detail {

inline void require_unit(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError(std::string(what) + " must lie in [0, 1], got " + std::to_string(x));
  }
}

// Probability that a bucket detector of efficiency eta clicks on n photons.
inline double click_probability(std::size_t n, double eta) {
  return 1.0 - std::pow(1.0 - eta, static_cast<double>(n));
}

inline FockDistribution normalized(FockDistribution d) {
  const double s = d.total();
  for (auto& x : d.p) x /= s;
  return d;
}

}  // namespace detail

// Joint anti-Stokes / spin-excitation number distribution produced by one
// write pulse: weights proportional to {1, chi, chi^2}.
inline FockDistribution emission_distribution(double chi) {
  if (!(chi >= 0.0 && chi < 1.0)) {
    throw DomainError("excitation probability chi must lie in [0, 1), got " + std::to_string(chi));
  }
  return detail::normalized(FockDistribution{{1.0, chi, chi * chi}});
}

// Probability that the herald detector clicks (at least one photon detected).
inline double herald_probability(const FockDistribution& dist, double eta_as) {
  detail::require_unit(eta_as, "eta_as");
  double h = 0.0;
  for (std::size_t n = 1; n <= kMaxQuanta; ++n) h += dist[n] * detail::click_probability(n, eta_as);
  return h;
}

// Spin-excitation distribution conditioned on a herald click.
inline FockDistribution heralded_excitation_distribution(const FockDistribution& dist, double eta_as) {
  const double h = herald_probability(dist, eta_as);
  if (!(h > 0.0)) throw DomainError("cannot condition on a herald with zero probability");
  FockDistribution q{{0.0, 0.0, 0.0}};
  for (std::size_t n = 1; n <= kMaxQuanta; ++n) q[n] = dist[n] * detail::click_probability(n, eta_as) / h;
  return q;
}

// Binomial loss: every quantum survives independently with probability gamma.
inline FockDistribution retrieve(const FockDistribution& spin_dist, double gamma) {
  detail::require_unit(gamma, "gamma");
  const double loss = 1.0 - gamma;
  const double q0 = spin_dist[0], q1 = spin_dist[1], q2 = spin_dist[2];
  return FockDistribution{{q0 + q1 * loss + q2 * loss * loss,
                           q1 * gamma + q2 * 2.0 * gamma * loss,
                           q2 * gamma * gamma}};
}

// Anti-correlation parameter 2 P_II / P_I^2 (0 for a perfect single photon,
// 1 for Poissonian light).
inline double alpha_of(const FockDistribution& photon_dist) {
  const double p1 = photon_dist[1];
  if (!(p1 > 0.0)) throw DomainError("alpha undefined: single-photon probability is zero");
  return 2.0 * photon_dist[2] / (p1 * p1);
}

// Smallest chi in [0, 1) whose herald probability at eta_as equals p_as.
// The herald probability is strictly increasing in chi, so the root of
//   (a - p) chi^2 + (eta - p) chi - p = 0,   a = eta (2 - eta)
// on [0, 1) is unique when it exists.
inline double solve_chi(double p_as, double eta_as) {
  detail::require_unit(p_as, "p_as");
  detail::require_unit(eta_as, "eta_as");
  if (p_as == 0.0) return 0.0;
  const double a = eta_as * (2.0 - eta_as);
  const double ceiling = (eta_as + a) / 3.0;  // herald probability as chi -> 1
  if (!(p_as < ceiling)) {
    throw DomainError("p_as=" + std::to_string(p_as) + " unreachable with eta_as=" + std::to_string(eta_as));
  }
  const double qa = a - p_as, qb = eta_as - p_as, qc = -p_as;
  double chi;
  if (std::abs(qa) < 1e-15) {
    chi = -qc / qb;
  } else {
    // Numerically stable positive root.
    const double disc = std::sqrt(qb * qb - 4.0 * qa * qc);
    chi = qb >= 0.0 ? (2.0 * -qc) / (qb + disc) : (-qb + disc) / (2.0 * qa);
  }
  return chi;
}

// Per-ensemble physical parameters.
//
// The herald rate is either derived from (chi, eta_as) or pinned directly by
// p_as. When p_as is pinned, the shape of the heralded excitation comes from
// chi if given (chi = 0 meaning an ideal single excitation), otherwise chi is
// solved so that the modeled herald rate equals p_as.
struct SourceParams {
  std::optional<double> chi;
  double eta_as = 1.0;
  std::optional<double> p_as;
  double gamma0 = 1.0;
  std::optional<double> alpha_override;
  // Per-attempt dark-click probability of the herald detector. A dark herald
  // loads no excitation.
  double dark_click = 0.0;

  void validate() const {
    if (chi && !(*chi >= 0.0 && *chi < 1.0)) throw DomainError("chi must lie in [0, 1)");
    detail::require_unit(eta_as, "eta_as");
    if (p_as) detail::require_unit(*p_as, "p_as");
    detail::require_unit(gamma0, "gamma0");
    detail::require_unit(dark_click, "dark_click");
    if (alpha_override && !(*alpha_override >= 0.0)) throw DomainError("alpha_override must be >= 0");
    if (!p_as && !chi) throw DomainError("source needs either chi or p_as");
  }

  // Chi that fixes the heralded excitation shape.
  double shape_chi() const {
    if (chi) return *chi;
    return solve_chi(*p_as, eta_as);
  }

  // Probability that an attempt yields a herald carrying a real excitation.
  double excitation_herald_probability() const {
    if (p_as) return *p_as;
    return hsync::herald_probability(emission_distribution(*chi), eta_as);
  }

  // Per-attempt herald probability including dark clicks.
  double herald_probability() const {
    const double p = excitation_herald_probability();
    return 1.0 - (1.0 - p) * (1.0 - dark_click);
  }

  // Excitation number in memory given a herald click (dark clicks included
  // as vacuum).
  FockDistribution spin_distribution() const {
    const double c = shape_chi();
    FockDistribution q = c == 0.0 ? FockDistribution{{0.0, 1.0, 0.0}}
                                  : heralded_excitation_distribution(emission_distribution(c), eta_as);
    const double h = herald_probability();
    if (h > 0.0 && dark_click > 0.0) {
      const double real = excitation_herald_probability() / h;
      for (auto& x : q.p) x *= real;
      q[0] += 1.0 - real;
    }
    return q;
  }

  // Alpha of the retrieved photon at zero hold time unless pinned.
  double alpha() const {
    if (alpha_override) return *alpha_override;
    return alpha_of(retrieve(spin_distribution(), gamma0));
  }
};

}  // namespace hsync
