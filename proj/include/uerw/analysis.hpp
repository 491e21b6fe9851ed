#pragma once

// Ensemble statistics: replica runs, survival classification, growth
// exponent regression, the standardized CLT sample, KS distance and the
// conditional-variance diagnostics of the martingale array.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string_view>
#include <thread>
#include <vector>

#include "uerw/errors.hpp"
#include "uerw/kernel.hpp"
#include "uerw/special_fn.hpp"
#include "uerw/walker.hpp"

namespace uerw {

// ---------------------------------------------------------------- parallel

/// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
/// exception thrown by any task is rethrown after all workers join.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ------------------------------------------------------------- statistics

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Linearly interpolated quantile of a sorted sample (type 7).
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InsufficientDataError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level must lie in [0,1]");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, 0.5);
}

struct Interval {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Wilson score interval for k successes out of n at normal quantile z.
inline Interval wilson_interval(std::uint64_t k, std::uint64_t n, double z = 1.959963984540054) {
  if (n == 0) throw InsufficientDataError("binomial interval needs n >= 1");
  if (k > n) throw DomainError("binomial interval needs k <= n");
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (phat + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {phat, std::clamp(centre - half, 0.0, phat), std::clamp(centre + half, phat, 1.0)};
}

/// sup_x |F_N(x) − F(x)| evaluated on both sides of every sample point.
inline double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw InsufficientDataError("ks_distance: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return std::clamp(d, 0.0, 1.0);
}

inline double ks_distance_normal(std::vector<double> sample) { return ks_distance(std::move(sample), normal_cdf); }

// --------------------------------------------------------------- survival

enum class SurvivalClass { kSurviving, kExtinct, kUndecided };

inline std::string_view survival_name(SurvivalClass c) {
  switch (c) {
    case SurvivalClass::kSurviving: return "surviving";
    case SurvivalClass::kExtinct: return "extinct";
    case SurvivalClass::kUndecided: return "undecided";
  }
  return "?";
}

struct SurvivalVerdict {
  SurvivalClass cls = SurvivalClass::kUndecided;
  /// Σ_{m>=n} p(β+1) Σ_n / (m μ_{m+1}) with Σ frozen; +inf when β <= 0.
  double tail_bound = std::numeric_limits<double>::infinity();
};

/// Probability bound for any further 1 after horizon n given no new 1 is
/// produced, using Σ_{m>=n} 1/(m μ_{m+1}) = 1/(β μ_n) for β > 0.
inline double extinction_tail_bound(const ModelParams& params, std::uint64_t n, double sigma) {
  if (params.beta() <= 0.0) return std::numeric_limits<double>::infinity();
  return params.drift() * sigma / (params.beta() * mu(params, n));
}

/// Classification at horizon n from (last 1-site, Σ_n).
inline SurvivalVerdict classify_survival(const ModelParams& params, std::uint64_t n, std::uint64_t last_one,
                                         double sigma, double delta) {
  SurvivalVerdict v;
  v.tail_bound = extinction_tail_bound(params, n, sigma);
  if (delta > 0.0 && v.tail_bound < delta) {
    v.cls = SurvivalClass::kExtinct;
  } else if (last_one > n / 10) {
    v.cls = SurvivalClass::kSurviving;
  } else {
    v.cls = SurvivalClass::kUndecided;
  }
  return v;
}

inline SurvivalVerdict classify_survival(const Trajectory& traj, double delta) {
  return classify_survival(traj.params(), traj.n(), traj.last_one(), traj.sigma(), delta);
}

inline SurvivalVerdict classify_survival(const ModelParams& params, const Checkpoint& cp, double delta) {
  return classify_survival(params, cp.n, cp.last_one, cp.sigma, delta);
}

// --------------------------------------------------------------- ensemble

struct EnsembleOptions {
  double checkpoint_ratio = 1.2;
  std::vector<std::uint64_t> extra_checkpoints;
  double delta = 1e-6;
  unsigned threads = 1;
  std::uint64_t n_min = 1000;
  /// CLT evaluation times; n_eval defaults to the largest grid point <= n_max/4, n_ref to n_max.
  std::optional<std::uint64_t> n_eval;
  std::optional<std::uint64_t> n_ref;
  bool truncation_correction = true;
  std::uint64_t memory_budget = kDefaultMemoryBudget;
};

struct ReplicaSummary {
  std::uint64_t replica = 0;
  std::vector<Checkpoint> checkpoints;
  SurvivalVerdict verdict;

  const Checkpoint& at(std::uint64_t n) const {
    const auto it = std::lower_bound(checkpoints.begin(), checkpoints.end(), n,
                                     [](const Checkpoint& c, std::uint64_t v) { return c.n < v; });
    if (it == checkpoints.end() || it->n != n) throw DomainError("no checkpoint at n = " + std::to_string(n));
    return *it;
  }
  const Checkpoint& final() const { return checkpoints.back(); }
};

struct Ensemble {
  ModelParams params;
  std::uint64_t n_max = 0;
  std::uint64_t seed = 0;
  double delta = 1e-6;
  std::vector<std::uint64_t> grid;
  std::vector<ReplicaSummary> replicas;  // ordered by replica index
};

/// Simulates replicas 0..R−1 of `seed` and keeps their checkpoint series.
inline Ensemble run_replicas(const ModelParams& params, std::uint64_t n_max, std::uint64_t replicas,
                             std::uint64_t seed, const EnsembleOptions& options = {}) {
  if (replicas < 1) throw DomainError("ensemble needs at least one replica");
  if (n_max < 1) throw DomainError("ensemble needs n_max >= 1");
  const unsigned threads = std::max(1u, options.threads);
  check_budget(n_max, false, options.memory_budget / threads);
  std::vector<std::uint64_t> extra = options.extra_checkpoints;
  if (options.n_eval) extra.push_back(*options.n_eval);
  if (options.n_ref) extra.push_back(*options.n_ref);
  const auto grid = CheckpointGrid::geometric(n_max, options.checkpoint_ratio, extra);
  Ensemble out{params, n_max, seed, options.delta, grid.points(), std::vector<ReplicaSummary>(replicas)};
  parallel_for(replicas, threads, [&](std::size_t r) {
    const Trajectory traj = simulate(params, n_max, seed, grid, false, r, options.memory_budget);
    auto& slot = out.replicas[r];
    slot.replica = r;
    slot.checkpoints = traj.checkpoints();
    slot.verdict = classify_survival(traj, options.delta);
  });
  return out;
}

// --------------------------------------------------------------- exponent

struct ExponentEstimate {
  Interval theta;
  std::size_t replicas = 0;
  std::size_t points_per_replica = 0;
};

/// Pooled within-replica least-squares slope of log S against log n over
/// points with n >= n_min; the interval is ±1.96 standard errors of the
/// per-replica slopes.
inline ExponentEstimate estimate_exponent(std::span<const std::vector<std::pair<double, double>>> series,
                                          double n_min = 1000.0) {
  double sxy = 0.0, sxx = 0.0;
  std::vector<double> slopes;
  std::size_t min_points = std::numeric_limits<std::size_t>::max();
  for (const auto& s : series) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& [n, value] : s) {
      if (n >= n_min && value > 0.0) pts.emplace_back(std::log(n), std::log(value));
    }
    if (pts.size() < 4) continue;
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
      mx += x;
      my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double rxy = 0.0, rxx = 0.0;
    for (const auto& [x, y] : pts) {
      rxy += (x - mx) * (y - my);
      rxx += (x - mx) * (x - mx);
    }
    if (!(rxx > 0.0)) continue;
    sxy += rxy;
    sxx += rxx;
    slopes.push_back(rxy / rxx);
    min_points = std::min(min_points, pts.size());
  }
  if (slopes.size() < 2) {
    throw InsufficientDataError("exponent estimate needs >= 2 series with >= 4 points at n >= n_min");
  }
  const double pooled = sxy / sxx;
  double mean = 0.0;
  for (double b : slopes) mean += b;
  mean /= static_cast<double>(slopes.size());
  double var = 0.0;
  for (double b : slopes) var += (b - mean) * (b - mean);
  var /= static_cast<double>(slopes.size() - 1);
  const double half = 1.959963984540054 * std::sqrt(var / static_cast<double>(slopes.size()));
  return {{pooled, pooled - half, pooled + half}, slopes.size(), min_points};
}

/// Exponent over the surviving replicas of an ensemble.
inline ExponentEstimate estimate_exponent(const Ensemble& ensemble, double n_min = 1000.0) {
  std::vector<std::vector<std::pair<double, double>>> series;
  for (const auto& r : ensemble.replicas) {
    if (r.verdict.cls != SurvivalClass::kSurviving) continue;
    auto& s = series.emplace_back();
    for (const auto& cp : r.checkpoints) s.emplace_back(static_cast<double>(cp.n), static_cast<double>(cp.s));
  }
  return estimate_exponent(series, n_min);
}

// -------------------------------------------------------------------- CLT

struct CltOptions {
  /// Scale η̂² by the part of the martingale tail left after n_ref:
  /// [β² + (p(β+1))² (1 − (n_eval/n_ref)^θ)] / θ² · C · M̂. When false, η̂² is
  /// the full-limit value eta_squared(params, M̂).
  bool truncation_correction = true;
};

struct CltSample {
  std::uint64_t n_eval = 0;
  std::uint64_t n_ref = 0;
  std::vector<double> z;               // W / (η̂ √(n_eval^θ))
  std::vector<double> unstandardized;  // W / √(n_eval^θ)
  std::vector<std::uint64_t> replica_ids;
  std::size_t excluded_zero_eta = 0;
  std::size_t excluded_class = 0;
  double ks = std::numeric_limits<double>::quiet_NaN();
};

/// Standardized CLT statistic of a single replica; nullopt when η̂ = 0.
struct CltValue {
  double z = 0.0;
  double unstandardized = 0.0;
};

inline std::optional<CltValue> clt_value(const ModelParams& params, double s_eval, std::uint64_t n_eval,
                                         std::uint64_t n_ref, double m_ref, const CltOptions& options = {}) {
  const double theta = params.theta();
  if (!(theta > 0.0)) throw DomainError("CLT statistic requires theta > 0");
  if (n_ref < n_eval) throw UsageError("CLT needs n_ref >= n_eval");
  const double scale = std::pow(static_cast<double>(n_eval), theta);
  const double w = s_eval - big_C(params) * m_ref * scale;
  double eta2 = eta_squared(params, m_ref);
  if (options.truncation_correction) {
    const double kept = 1.0 - std::pow(static_cast<double>(n_eval) / static_cast<double>(n_ref), theta);
    const double b = params.beta(), d = params.drift();
    eta2 = (b * b + d * d * kept) / (theta * theta) * big_C(params) * m_ref;
  }
  if (!(eta2 > 0.0)) return std::nullopt;
  const double root = std::sqrt(scale);
  return CltValue{w / (std::sqrt(eta2) * root), w / root};
}

/// Over replicas eligible for the CLT (all when β <= 0, the surviving ones
/// when β > 0), with M_∞ estimated by M_{n_ref} of the same path.
inline CltSample clt_sample(const Ensemble& ensemble, std::uint64_t n_eval, std::uint64_t n_ref,
                            const CltOptions& options = {}) {
  if (!(ensemble.params.theta() > 0.0)) throw DomainError("CLT statistic requires theta > 0");
  if (n_ref < n_eval) throw UsageError("CLT needs n_ref >= n_eval");
  CltSample out;
  out.n_eval = n_eval;
  out.n_ref = n_ref;
  const bool survivors_only = ensemble.params.beta() > 0.0;
  for (const auto& r : ensemble.replicas) {
    if (survivors_only && r.verdict.cls != SurvivalClass::kSurviving) {
      ++out.excluded_class;
      continue;
    }
    const auto value = clt_value(ensemble.params, static_cast<double>(r.at(n_eval).s), n_eval, n_ref,
                                 r.at(n_ref).m, options);
    if (!value) {
      ++out.excluded_zero_eta;
      continue;
    }
    out.z.push_back(value->z);
    out.unstandardized.push_back(value->unstandardized);
    out.replica_ids.push_back(r.replica);
  }
  if (!out.z.empty()) out.ks = ks_distance_normal(out.z);
  return out;
}

// ----------------------------------------------------------------- report

struct CheckpointStats {
  std::uint64_t n = 0;
  double mean_s = 0.0;
  double mean_sigma = 0.0;
  double mean_m = 0.0;
  double se_m = 0.0;
  double s_q10 = 0.0;
  double s_q50 = 0.0;
  double s_q90 = 0.0;
};

struct EnsembleReport {
  ModelParams params;
  std::uint64_t replicas = 0;
  std::uint64_t seed = 0;
  std::uint64_t n_max = 0;
  double delta = 0.0;
  std::vector<CheckpointStats> checkpoints;
  std::uint64_t surviving = 0;
  std::uint64_t extinct = 0;
  std::uint64_t undecided = 0;
  std::optional<Interval> survival;  // among decided replicas
  std::optional<ExponentEstimate> exponent;
  std::optional<CltSample> clt;
};

inline EnsembleReport summarize(const Ensemble& ensemble, const EnsembleOptions& options = {}) {
  EnsembleReport rep{.params = ensemble.params,
                     .replicas = ensemble.replicas.size(),
                     .seed = ensemble.seed,
                     .n_max = ensemble.n_max,
                     .delta = ensemble.delta,
                     .checkpoints = {},
                     .survival = {},
                     .exponent = {},
                     .clt = {}};
  const double r = static_cast<double>(ensemble.replicas.size());
  for (std::size_t i = 0; i < ensemble.grid.size(); ++i) {
    CheckpointStats st;
    st.n = ensemble.grid[i];
    CompensatedSum s_sum, sigma_sum, m_sum, m_sq;
    std::vector<double> s_values;
    s_values.reserve(ensemble.replicas.size());
    for (const auto& rep_i : ensemble.replicas) {
      const Checkpoint& cp = rep_i.checkpoints[i];
      s_sum.add(static_cast<double>(cp.s));
      sigma_sum.add(cp.sigma);
      m_sum.add(cp.m);
      s_values.push_back(static_cast<double>(cp.s));
    }
    st.mean_s = s_sum.value() / r;
    st.mean_sigma = sigma_sum.value() / r;
    st.mean_m = m_sum.value() / r;
    if (ensemble.replicas.size() > 1) {
      for (const auto& rep_i : ensemble.replicas) {
        const double dev = rep_i.checkpoints[i].m - st.mean_m;
        m_sq.add(dev * dev);
      }
      st.se_m = std::sqrt(m_sq.value() / (r - 1.0) / r);
    }
    std::sort(s_values.begin(), s_values.end());
    st.s_q10 = quantile_sorted(s_values, 0.1);
    st.s_q50 = quantile_sorted(s_values, 0.5);
    st.s_q90 = quantile_sorted(s_values, 0.9);
    rep.checkpoints.push_back(st);
  }
  for (const auto& rep_i : ensemble.replicas) {
    switch (rep_i.verdict.cls) {
      case SurvivalClass::kSurviving: ++rep.surviving; break;
      case SurvivalClass::kExtinct: ++rep.extinct; break;
      case SurvivalClass::kUndecided: ++rep.undecided; break;
    }
  }
  if (rep.surviving + rep.extinct > 0) rep.survival = wilson_interval(rep.surviving, rep.surviving + rep.extinct);
  try {
    rep.exponent = estimate_exponent(ensemble, static_cast<double>(options.n_min));
  } catch (const InsufficientDataError&) {
  }
  if (ensemble.params.theta() > 0.0) {
    std::uint64_t n_ref = options.n_ref.value_or(ensemble.n_max);
    std::optional<std::uint64_t> n_eval = options.n_eval;
    if (!n_eval) {
      for (std::uint64_t n : ensemble.grid) {
        if (n <= n_ref / 4) n_eval = n;
      }
    }
    if (n_eval && *n_eval <= n_ref) {
      rep.clt = clt_sample(ensemble, *n_eval, n_ref, CltOptions{options.truncation_correction});
    }
  }
  return rep;
}

inline EnsembleReport run_ensemble(const ModelParams& params, std::uint64_t n_max, std::uint64_t replicas,
                                   std::uint64_t seed, const EnsembleOptions& options = {}) {
  return summarize(run_replicas(params, n_max, replicas, seed, options), options);
}

// ---------------------------------------------------- variance diagnostics

struct ConditionalVarianceProfile {
  std::uint64_t n = 0;
  std::uint64_t horizon = 0;
  double m_hat = 0.0;      // M at the trajectory horizon
  double head_sum = 0.0;   // Σ_{k<=n} E[X_{n,k}² | F_{k−1}]
  double tail_sum = 0.0;   // Σ_{k>n} E[X_{n,k}² | F_{k−1}]
  double eta2_hat = 0.0;   // eta_squared(params, m_hat)
  double head_ratio = std::numeric_limits<double>::quiet_NaN();
  double tail_ratio = std::numeric_limits<double>::quiet_NaN();
};

/// Conditional variances of the martingale array along a realized path.
/// Terms for n < k <= horizon use the realized conditional means; beyond the
/// horizon the path is continued with M frozen at M_horizon, whose terms
/// decay like k^{−θ−1} and are summed in closed form.
inline ConditionalVarianceProfile conditional_variance_profile(const Trajectory& traj, std::uint64_t n) {
  const ModelParams& params = traj.params();
  const double theta = params.theta();
  if (!(theta > 0.0)) throw DomainError("conditional variance profile requires theta > 0");
  if (n < 1 || n >= traj.n()) throw DomainError("conditional variance profile needs 1 <= n < horizon");
  const double beta = params.beta(), drift = params.drift();
  const double bigc = big_C(params);
  ConditionalVarianceProfile out;
  out.n = n;
  out.horizon = traj.n();
  out.m_hat = traj.martingale();
  out.eta2_hat = eta_squared(params, out.m_hat);

  const double n_theta = std::pow(static_cast<double>(n), theta);
  // Γ(n+p(β+1))/Γ(n+β)
  const double gamma_ratio = std::exp(special::log_gamma_ratio(static_cast<double>(n) + beta, theta));
  const double tail_prefactor = bigc * bigc * gamma_ratio * gamma_ratio / n_theta;

  CompensatedSum head, tail, sigma;
  double mu_k = 1.0;                                  // μ_k
  double log_r = 0.0;                                 // log(c_k(β)/c_k(p(β+1)))
  sigma.add(1.0);
  double last_term = 0.0;
  for (std::uint64_t k = 1; k < traj.n(); ++k) {
    // Transition k -> k+1: q = E[X_{k+1} | F_k].
    const double kd = static_cast<double>(k);
    const double mu_next = mu_k * (kd + beta) / kd;
    log_r += std::log1p(beta / kd) - std::log1p(drift / kd);
    const double q = drift * sigma.value() / (kd * mu_next);
    const double v = q * (1.0 - q);
    if (k + 1 <= n) {
      head.add(v);
    } else {
      last_term = std::exp(2.0 * log_r) * v;
      tail.add(last_term);
    }
    mu_k = mu_next;
    if (traj.x(k + 1)) sigma.add(mu_k);
  }
  const double h = static_cast<double>(traj.n());
  const double completion = last_term * std::pow(h, theta + 1.0) * std::pow(h + 0.5, -theta) / theta;
  out.head_sum = beta * beta / (theta * theta) * head.value() / n_theta;
  out.tail_sum = tail_prefactor * (tail.value() + completion);
  const double head_limit = beta * beta / (theta * theta) * bigc * out.m_hat;
  const double tail_limit = drift * drift / (theta * theta) * bigc * out.m_hat;
  if (head_limit > 0.0) out.head_ratio = out.head_sum / head_limit;
  if (tail_limit > 0.0) out.tail_ratio = out.tail_sum / tail_limit;
  return out;
}

struct RemainderPoint {
  std::uint64_t n = 0;
  double value = 0.0;  // |Γ(n+p(β+1))/Γ(n+β) − n^θ| · n^{1−θ}
};

inline std::vector<RemainderPoint> remainder_decay_check(const ModelParams& params,
                                                         std::span<const std::uint64_t> grid) {
  const double theta = params.theta();
  if (!(theta > 0.0 && theta < 1.0)) throw PreconditionError("remainder check requires theta in (0,1)");
  std::vector<RemainderPoint> out;
  out.reserve(grid.size());
  for (std::uint64_t n : grid) {
    if (n < 1) throw DomainError("remainder check needs n >= 1");
    const double x = static_cast<double>(n);
    const double excess = special::log_gamma_ratio(x + params.beta(), theta) - theta * std::log(x);
    out.push_back({n, std::fabs(x * std::expm1(excess))});
  }
  return out;
}

}  // namespace uerw
