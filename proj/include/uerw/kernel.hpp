#pragma once

// Model parameters and the power-law memory kernel.
//
// Weights μ_k = c_k(β), normalizers c_n(γ) = Γ(n+γ)/(Γ(n)Γ(γ+1)), and the
// memory-index law P(β_{n+1} = k) = μ_k / c_n(β+1) on 1..n (this uses
// Σ_{ℓ<=n} μ_ℓ = c_n(β+1)).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uerw/errors.hpp"
#include "uerw/index_set.hpp"
#include "uerw/special_fn.hpp"

namespace uerw {

enum class Regime {
  kDriftSub,    // -1 < β <= 0
  kDriftSuper,  // 0 < β < p/(1-p)
  kCritical,    // β = p/(1-p)
  kSubextinct,  // β > p/(1-p)
};

inline constexpr double kThetaTolerance = 1e-12;

inline std::string_view regime_name(Regime r) {
  switch (r) {
    case Regime::kDriftSub: return "DRIFT_SUB";
    case Regime::kDriftSuper: return "DRIFT_SUPER";
    case Regime::kCritical: return "CRITICAL";
    case Regime::kSubextinct: return "SUBEXTINCT";
  }
  return "UNKNOWN";
}

/// Immutable (p, β) pair with the growth exponent θ = p(β+1) − β.
class ModelParams {
 public:
  ModelParams(double p, double beta) : p_(p), beta_(beta) {
    if (!std::isfinite(p) || !(p > 0.0 && p < 1.0)) {
      throw DomainError("p must lie in (0,1), got " + std::to_string(p));
    }
    if (!std::isfinite(beta) || !(beta > -1.0)) {
      throw DomainError("beta > -1 required, got " + std::to_string(beta));
    }
    theta_ = p * (beta + 1.0) - beta;
    if (std::fabs(theta_) <= kThetaTolerance) {
      theta_ = 0.0;
      regime_ = Regime::kCritical;
    } else if (theta_ < 0.0) {
      regime_ = Regime::kSubextinct;
    } else {
      regime_ = beta <= 0.0 ? Regime::kDriftSub : Regime::kDriftSuper;
    }
  }

  double p() const { return p_; }
  double beta() const { return beta_; }
  double theta() const { return theta_; }
  Regime regime() const { return regime_; }
  /// p(β+1), the exponent of E[Σ_n].
  double drift() const { return p_ * (beta_ + 1.0); }
  /// p/(1−p), the critical memory exponent.
  double critical_beta() const { return p_ / (1.0 - p_); }

 private:
  double p_;
  double beta_;
  double theta_ = 0.0;
  Regime regime_ = Regime::kDriftSub;
};

/// ln c_n(γ).
inline double log_c(double gamma, std::uint64_t n) {
  if (n < 1) throw DomainError("c_n(gamma) requires n >= 1");
  if (!(gamma > -1.0)) throw DomainError("c_n(gamma) requires gamma > -1");
  if (n == 1) return 0.0;
  return special::log_gamma_ratio(static_cast<double>(n), gamma) - special::log_gamma_ratio(1.0, gamma);
}

/// c_n(γ) = Γ(n+γ)/(Γ(n)Γ(γ+1)).
inline double c(double gamma, std::uint64_t n) { return std::exp(log_c(gamma, n)); }

/// μ_n = c_n(β).
inline double mu(const ModelParams& params, std::uint64_t n) { return c(params.beta(), n); }

/// C(p,β) = Γ(β+1) / (θ Γ(p(β+1))), defined only for θ > 0.
inline double big_C(const ModelParams& params) {
  if (!(params.theta() > 0.0)) {
    throw DomainError("C(p,beta) is undefined unless beta < p/(1-p)");
  }
  return std::exp(special::log_gamma(params.beta() + 1.0) - special::log_gamma(params.drift())) /
         params.theta();
}

/// (p²(β+1)² + β²) / θ², the factor multiplying C·M_∞ in η².
inline double eta_coefficient(const ModelParams& params) {
  if (!(params.theta() > 0.0)) {
    throw DomainError("eta is undefined unless beta < p/(1-p)");
  }
  const double a = params.drift();
  const double b = params.beta();
  return (a * a + b * b) / (params.theta() * params.theta());
}

inline double eta_squared(const ModelParams& params, double m_inf) {
  if (!(m_inf >= 0.0)) throw DomainError("eta_squared: M_inf must be >= 0");
  return eta_coefficient(params) * big_C(params) * m_inf;
}

/// P(β_{n+1} = k).
inline double memory_pmf(const ModelParams& params, std::uint64_t n, std::int64_t k) {
  if (n < 1) throw DomainError("memory_pmf requires n >= 1");
  if (k < 1 || static_cast<std::uint64_t>(k) > n) return 0.0;
  return std::exp(log_c(params.beta(), static_cast<std::uint64_t>(k)) - log_c(params.beta() + 1.0, n));
}

/// Running table of c_m(β+1) = Σ_{ℓ<=m} μ_ℓ for m = 1..n, grown one cell
/// per step by c_{m+1} = c_m·(m+β+1)/m. The next weight μ_{n+1} is tracked
/// alongside. Both are re-anchored on the log-gamma form every 2^20 cells.
class CumulativeWeights {
 public:
  static constexpr std::uint64_t kAnchorPeriod = std::uint64_t{1} << 20;
  static constexpr double kDriftLimit = 1e-8;

  explicit CumulativeWeights(double beta, std::uint64_t reserve = 0) : beta_(beta) {
    if (!(beta > -1.0)) throw DomainError("beta > -1 required");
    table_.reserve(reserve);
    table_.push_back(1.0);  // c_1(β+1) = μ_1 = 1
    mu_next_ = 1.0 + beta;  // μ_2 = (1+β)/1 · μ_1
  }

  std::uint64_t size() const { return table_.size(); }
  double beta() const { return beta_; }
  /// c_m(β+1), 1-based.
  double cumulative(std::uint64_t m) const { return table_[m - 1]; }
  /// μ_{n+1} for the current size n.
  double mu_next() const { return mu_next_; }
  std::span<const double> table() const { return table_; }

  /// Extends the table from n to n + 1.
  void grow() {
    const double n = static_cast<double>(table_.size());
    double next = table_.back() * (n + beta_ + 1.0) / n;
    double mu_after = mu_next_ * (n + 1.0 + beta_) / (n + 1.0);
    const std::uint64_t m = table_.size() + 1;
    if (m % kAnchorPeriod == 0) {
      next = reanchor(next, c(beta_ + 1.0, m), "cumulative weight");
      mu_after = reanchor(mu_after, c(beta_, m + 1), "memory weight");
    }
    table_.push_back(next);
    mu_next_ = mu_after;
  }

  /// Smallest m in [1, n] with c_m(β+1) >= u·c_n(β+1), by bisection.
  std::uint64_t sample_bisect(double u) const {
    const double target = u * table_.back();
    const auto it = std::lower_bound(table_.begin(), table_.end(), target);
    return it == table_.end() ? table_.size() : static_cast<std::uint64_t>(it - table_.begin()) + 1;
  }

  /// Same result as sample_bisect, seeded with the asymptotic inverse
  /// c_m(β+1) ≈ c_n(β+1)·(m/n)^{β+1} and bracketed by galloping.
  std::uint64_t sample(double u) const {
    const std::uint64_t n = table_.size();
    if (n <= 32) return sample_bisect(u);
    const double target = u * table_.back();
    const double guess_real = static_cast<double>(n) * std::pow(u, 1.0 / (beta_ + 1.0));
    std::uint64_t guess = static_cast<std::uint64_t>(std::clamp(guess_real, 1.0, static_cast<double>(n)));
    // Invariant during the search: answer in (lo, hi], table_[hi-1] >= target.
    std::uint64_t lo = 0;
    std::uint64_t hi = n;
    if (table_[guess - 1] >= target) {
      hi = guess;
      std::uint64_t step = 1;
      while (hi > step && table_[hi - step - 1] >= target) {
        hi -= step;
        step <<= 1;
      }
      lo = hi > step ? hi - step : 0;
    } else {
      lo = guess;
      std::uint64_t step = 1;
      while (lo + step < n && table_[lo + step - 1] < target) {
        lo += step;
        step <<= 1;
      }
      hi = std::min(n, lo + step);
    }
    const auto first = table_.begin() + static_cast<std::ptrdiff_t>(lo);
    const auto last = table_.begin() + static_cast<std::ptrdiff_t>(hi);
    const auto it = std::lower_bound(first, last, target);
    return static_cast<std::uint64_t>(it - table_.begin()) + 1;
  }

 private:
  static double reanchor(double incremental, double exact, const char* what) {
    if (std::fabs(incremental - exact) > kDriftLimit * exact) {
      throw InternalError(std::string("incremental ") + what + " drifted beyond 1e-8 relative");
    }
    return exact;
  }

  double beta_;
  std::vector<double> table_;
  double mu_next_;
};

/// Inverse-CDF draw of β_{n+1} from a table holding c_m(β+1), m = 1..n.
inline std::uint64_t sample_memory_index(const CumulativeWeights& weights, std::uint64_t n, double u) {
  if (n != weights.size()) throw DomainError("sample_memory_index: table size must equal n");
  return weights.sample(u);
}

/// Draw from the 𝕊-restricted law: k ∈ 𝕊 ∩ [1,n] with probability
/// x_k μ_k / c_n(β+1), otherwise 0. Excluded draws carry exactly the null mass.
inline std::uint64_t modified_memory_sample(const CumulativeWeights& weights, std::uint64_t n,
                                            const IndexSet& index_set, double u) {
  const std::uint64_t k = sample_memory_index(weights, n, u);
  return index_set.contains(k) ? k : 0;
}

}  // namespace uerw
