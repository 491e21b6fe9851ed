#pragma once

// Exact first and second moments of the (possibly 𝕊-restricted) walk from
// the one-step conditional laws
//
//   E[Ξ_{n+1} | F_n]  = (1 + p w_n) Ξ_n,
//   E[Ξ_{n+1}² | F_n] = (1 + 2p w_n) Ξ_n² + p w_n μ_{n+1} Ξ_n,
//   E[Y_{n+1} | F_n]  = p w_n Ξ_n / μ_{n+1},       w_n = (β+1) x_{n+1} / n,
//
// started from Ξ_{s1} = μ_{s1}. For 𝕊 = ℕ these are E[Σ_n], E[Σ_n²], E[S_n].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "uerw/errors.hpp"
#include "uerw/index_set.hpp"
#include "uerw/kernel.hpp"
#include "uerw/walker.hpp"

namespace uerw {

struct MomentPoint {
  std::uint64_t n = 0;
  double e_s = 0.0;    // E[T_n] (E[S_n] when 𝕊 = ℕ)
  double e_xi = 0.0;   // E[Ξ_n]
  double e_xi2 = 0.0;  // E[Ξ_n²]; +inf if beyond double range
  double log_e_xi = -std::numeric_limits<double>::infinity();
  double log_e_xi2 = -std::numeric_limits<double>::infinity();
  double ratio = 0.0;  // E[Ξ_n²] / E[Ξ_n]², computed in log space
};

struct MomentSeries {
  ModelParams params;
  std::string index_set;
  std::uint64_t s1 = 1;
  std::vector<MomentPoint> points;

  const MomentPoint& at(std::uint64_t n) const {
    const auto it = std::lower_bound(points.begin(), points.end(), n,
                                     [](const MomentPoint& p, std::uint64_t v) { return p.n < v; });
    if (it == points.end() || it->n != n) throw DomainError("moment series has no grid point " + std::to_string(n));
    return *it;
  }
};

namespace detail {

// Values are carried directly while small and in log space past this bound.
inline constexpr double kLogSwitch = 600.0;

inline double log_sum_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

}  // namespace detail

/// Runs the three recursions to n_max and records them at the grid points.
inline MomentSeries exact_moments(const ModelParams& params, const IndexSet& index_set, std::uint64_t n_max,
                                  const CheckpointGrid& grid) {
  const std::uint64_t s1 = index_set.s1();
  MomentSeries out{params, index_set.description(), s1, {}};
  const auto& pts = grid.points();
  std::size_t next = 0;
  auto emit = [&](std::uint64_t n, double e_s, double log_e, double log_q) {
    while (next < pts.size() && pts[next] < n) ++next;
    if (next >= pts.size() || pts[next] != n || n > n_max) return;
    MomentPoint mp;
    mp.n = n;
    mp.e_s = e_s;
    mp.log_e_xi = log_e;
    mp.log_e_xi2 = log_q;
    mp.e_xi = std::exp(log_e);
    mp.e_xi2 = std::exp(log_q);
    mp.ratio = (n < s1) ? 0.0 : std::exp(log_q - 2.0 * log_e);
    out.points.push_back(mp);
    ++next;
  };

  for (std::uint64_t n = 1; n < s1 && n <= n_max; ++n) {
    emit(n, 0.0, -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity());
  }
  if (s1 > n_max) return out;

  const double p = params.p();
  const double b1 = params.beta() + 1.0;
  // State: log E[Ξ_n], log E[Ξ_n²] (exact log-space), and E[T_n].
  double log_mu_next = log_c(params.beta(), s1 + 1);
  double mu_cur = mu(params, s1);
  double log_e = std::log(mu_cur);
  double log_q = 2.0 * log_e;
  // Direct-space mirrors, used while the values stay moderate.
  double e = mu_cur;
  double q = mu_cur * mu_cur;
  bool direct = true;
  CompensatedSum e_t;
  e_t.add(1.0);
  emit(s1, e_t.value(), log_e, log_q);

  for (std::uint64_t n = s1; n < n_max; ++n) {
    const double nd = static_cast<double>(n);
    const bool member = index_set.contains(n + 1);
    const double w = member ? b1 / nd : 0.0;
    const double mu_next = std::exp(log_mu_next);
    if (w > 0.0) {
      e_t.add(p * w * (direct ? e : std::exp(log_e)) / mu_next);
      if (direct) {
        q = (1.0 + 2.0 * p * w) * q + p * w * mu_next * e;
        e = (1.0 + p * w) * e;
        if (std::log(q) > detail::kLogSwitch) {
          direct = false;
          log_e = std::log(e);
          log_q = std::log(q);
        }
      } else {
        log_q = detail::log_sum_exp(log_q + std::log1p(2.0 * p * w), std::log(p * w) + log_mu_next + log_e);
        log_e += std::log1p(p * w);
      }
    }
    if (direct) {
      log_e = std::log(e);
      log_q = std::log(q);
    }
    // μ_{n+2} = μ_{n+1}·(n+1+β)/(n+1); re-anchor periodically.
    const std::uint64_t after = n + 2;
    if (after % CumulativeWeights::kAnchorPeriod == 0) {
      log_mu_next = log_c(params.beta(), after);
    } else {
      log_mu_next += std::log1p(params.beta() / (nd + 1.0));
    }
    emit(n + 1, e_t.value(), log_e, log_q);
  }
  return out;
}

inline MomentSeries exact_mean_xi(const ModelParams& params, const IndexSet& index_set, std::uint64_t n_max,
                                  const CheckpointGrid& grid) {
  return exact_moments(params, index_set, n_max, grid);
}

inline MomentSeries exact_second_moment_xi(const ModelParams& params, const IndexSet& index_set,
                                           std::uint64_t n_max, const CheckpointGrid& grid) {
  return exact_moments(params, index_set, n_max, grid);
}

/// E[S_n] for the unrestricted walk via E[S_{n+1}] = E[S_n] + p(β+1) E[Σ_n] / (n μ_{n+1}).
inline MomentSeries exact_mean_s(const ModelParams& params, std::uint64_t n_max, const CheckpointGrid& grid) {
  return exact_moments(params, IndexSet::all(), n_max, grid);
}

struct RatioCertificate {
  double sup_ratio = 1.0;
  /// ratio(n_max) − ratio(⌈n_max/10⌉).
  double tail_increment = 0.0;
  std::uint64_t n0 = 1;
  MomentSeries series;
};

/// Empirical evidence that E[Ξ_n²]/E[Ξ_n]² stays bounded: its running
/// supremum and last-decade increment. Requires θ > 0 and that 𝕊 satisfies
/// m_n <= n^θ from some N0 <= n_max on.
inline RatioCertificate ratio_certificate(const ModelParams& params, const IndexSet& index_set,
                                          std::uint64_t n_max) {
  if (!(params.theta() > 0.0)) throw PreconditionError("ratio_certificate requires theta > 0");
  if (n_max < 10) throw PreconditionError("ratio_certificate requires n_max >= 10");
  const auto n0 = index_set.find_n0(params.theta(), n_max);
  if (!n0) throw PreconditionError("index set violates m_n <= n^theta at the horizon");
  const std::uint64_t decade_start = (n_max + 9) / 10;
  std::vector<std::uint64_t> extra = {decade_start, n_max};
  auto grid = CheckpointGrid::geometric(n_max, 1.05, extra);
  RatioCertificate cert{1.0, 0.0, *n0, exact_moments(params, index_set, n_max, grid)};
  for (const auto& pt : cert.series.points) {
    if (pt.n >= cert.series.s1) cert.sup_ratio = std::max(cert.sup_ratio, pt.ratio);
  }
  cert.tail_increment = cert.series.at(n_max).ratio - cert.series.at(decade_start).ratio;
  return cert;
}

struct PaleyZygmundResult {
  double lhs = 0.0;  // P(Z > θ E[Z])
  double rhs = 0.0;  // (1−θ)² E[Z]² / E[Z²]
  bool holds = false;
};

/// Both sides of P(Z > θE[Z]) >= (1−θ)² E[Z]²/E[Z²] for a finite pmf given
/// as (value, probability) pairs.
inline PaleyZygmundResult paley_zygmund_check(std::span<const std::pair<double, double>> pmf, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("Paley-Zygmund: theta must lie in (0,1)");
  double total = 0.0, mean = 0.0, second = 0.0;
  for (const auto& [value, prob] : pmf) {
    if (!(value >= 0.0) || !std::isfinite(value)) throw DomainError("Paley-Zygmund: values must be finite and >= 0");
    if (!(prob >= 0.0)) throw DomainError("Paley-Zygmund: probabilities must be >= 0");
    total += prob;
    mean += prob * value;
    second += prob * value * value;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw DomainError("Paley-Zygmund: probabilities must sum to 1");
  if (!(mean > 0.0)) throw DomainError("Paley-Zygmund: E[Z] must be > 0");
  PaleyZygmundResult r;
  const double threshold = theta * mean;
  for (const auto& [value, prob] : pmf) {
    if (value > threshold) r.lhs += prob;
  }
  r.rhs = (1.0 - theta) * (1.0 - theta) * mean * mean / second;
  r.holds = r.lhs >= r.rhs - 1e-12;
  return r;
}

}  // namespace uerw
