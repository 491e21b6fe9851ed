#pragma once

// The unidirectional elephant random walk and its 𝕊-restricted variant.
//
//   X_1 = 1,  X_{n+1} = X_{β_{n+1}} with probability p, else 0,
//   S_n = Σ X_k,  Σ_n = Σ μ_k X_k,  M_n = Σ_n / c_n(p(β+1)).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uerw/errors.hpp"
#include "uerw/index_set.hpp"
#include "uerw/kernel.hpp"
#include "uerw/rng.hpp"

namespace uerw {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double value) {
    const double t = sum_ + value;
    if (std::fabs(sum_) >= std::fabs(value)) {
      carry_ += (sum_ - t) + value;
    } else {
      carry_ += (value - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// One bit per step, 1-based.
class PackedBits {
 public:
  void reserve(std::uint64_t n) { words_.reserve(n / 64 + 1); }
  std::uint64_t size() const { return size_; }
  bool get(std::uint64_t k) const {
    const std::uint64_t i = k - 1;
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }
  void push_back(bool bit) {
    if ((size_ & 63) == 0) words_.push_back(0);
    if (bit) words_.back() |= std::uint64_t{1} << (size_ & 63);
    ++size_;
  }
  std::uint64_t count() const {
    std::uint64_t total = 0;
    for (std::uint64_t w : words_) total += static_cast<std::uint64_t>(__builtin_popcountll(w));
    return total;
  }
  bool operator==(const PackedBits&) const = default;

 private:
  std::vector<std::uint64_t> words_;
  std::uint64_t size_ = 0;
};

/// Sorted checkpoint times. The default grid is ⌈r^j⌉ deduplicated, plus n_max.
class CheckpointGrid {
 public:
  CheckpointGrid() = default;

  static CheckpointGrid geometric(std::uint64_t n_max, double ratio = 1.2,
                                  std::span<const std::uint64_t> extra = {}) {
    if (n_max < 1) throw DomainError("checkpoint grid needs n_max >= 1");
    if (!(ratio > 1.0)) throw DomainError("checkpoint ratio must exceed 1");
    std::vector<std::uint64_t> points;
    for (int j = 0;; ++j) {
      const double v = std::ceil(std::pow(ratio, j));
      if (v > static_cast<double>(n_max)) break;
      points.push_back(static_cast<std::uint64_t>(v));
    }
    points.push_back(n_max);
    for (std::uint64_t e : extra) {
      if (e >= 1 && e <= n_max) points.push_back(e);
    }
    return explicit_points(std::move(points));
  }

  static CheckpointGrid explicit_points(std::vector<std::uint64_t> points) {
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    if (!points.empty() && points.front() == 0) throw DomainError("checkpoint at n = 0");
    CheckpointGrid grid;
    grid.points_ = std::move(points);
    return grid;
  }

  const std::vector<std::uint64_t>& points() const { return points_; }
  bool empty() const { return points_.empty(); }

 private:
  std::vector<std::uint64_t> points_;
};

struct Checkpoint {
  std::uint64_t n = 0;
  std::uint64_t s = 0;
  double sigma = 0.0;
  double m = 0.0;
  /// Largest k <= n with X_k = 1.
  std::uint64_t last_one = 0;

  bool operator==(const Checkpoint&) const = default;
};

/// Record of the step that produced X_k: coin outcome and drawn index.
struct StepLink {
  std::uint64_t drawn = 0;  // 0 when the index was not drawn
  bool success = false;
};

/// Bytes needed for a run of n_max steps.
inline std::uint64_t trajectory_bytes(std::uint64_t n_max, bool track_links) {
  return n_max * sizeof(double) + n_max / 8 + 8 + (track_links ? n_max * sizeof(std::uint32_t) : 0);
}

inline constexpr std::uint64_t kDefaultMemoryBudget = std::uint64_t{4} << 30;

inline void check_budget(std::uint64_t n_max, bool track_links, std::uint64_t budget) {
  if (n_max >= (std::uint64_t{1} << 31)) throw ResourceError("n_max must stay below 2^31");
  const std::uint64_t need = trajectory_bytes(n_max, track_links);
  if (need > budget) {
    throw ResourceError("trajectory needs " + std::to_string(need) + " bytes, budget is " +
                        std::to_string(budget));
  }
}

/// One realization of the walk, advanced one step at a time by its owner.
class Trajectory {
 public:
  explicit Trajectory(ModelParams params, CheckpointGrid grid = {}, bool track_links = false,
                      std::uint64_t reserve = 0)
      : params_(params), grid_(std::move(grid)), track_links_(track_links), weights_(params.beta(), reserve) {
    bits_.reserve(reserve);
    if (track_links_) links_.reserve(reserve);
    bits_.push_back(true);
    s_ = 1;
    last_one_ = 1;
    sigma_.add(1.0);
    if (track_links_) links_.push_back(0);
    maybe_checkpoint();
  }

  const ModelParams& params() const { return params_; }
  std::uint64_t n() const { return bits_.size(); }
  std::uint64_t s() const { return s_; }
  double sigma() const { return sigma_.value(); }
  std::uint64_t last_one() const { return last_one_; }
  bool x(std::uint64_t k) const { return bits_.get(k); }
  const PackedBits& bits() const { return bits_; }
  bool tracks_links() const { return track_links_; }
  const CumulativeWeights& weights() const { return weights_; }
  const std::vector<Checkpoint>& checkpoints() const { return checkpoints_; }
  const CheckpointGrid& grid() const { return grid_; }

  /// μ_{n+1}.
  double mu_next() const { return weights_.mu_next(); }

  /// M_n at the current time.
  double martingale() const { return sigma() / c(params_.drift(), n()); }

  /// M_k at the current time or at a recorded checkpoint.
  double martingale_value(std::uint64_t k) const {
    if (k == n()) return martingale();
    const auto it = std::lower_bound(checkpoints_.begin(), checkpoints_.end(), k,
                                     [](const Checkpoint& cp, std::uint64_t v) { return cp.n < v; });
    if (it == checkpoints_.end() || it->n != k) {
      throw DomainError("martingale_value: time " + std::to_string(k) + " is neither current nor checkpointed");
    }
    return it->m;
  }

  /// E[X_{n+1} | F_n] = p(β+1) Σ_n / (n μ_{n+1}).
  double conditional_mean_next() const {
    return params_.drift() * sigma() / (static_cast<double>(n()) * mu_next());
  }

  /// Link of the step that produced X_k (k >= 2).
  StepLink link(std::uint64_t k) const {
    if (!track_links_) throw DomainError("trajectory was simulated without link tracking");
    if (k < 2 || k > n()) throw DomainError("link index out of range");
    const std::uint32_t packed = links_[k - 1];
    return {packed & kIndexMask, (packed & kSuccessBit) != 0};
  }

  /// Advances n -> n+1 with a coin variate in [0,1) and an index variate in (0,1).
  void step(double coin, double index_u) {
    const std::uint64_t current = n();
    const bool success = coin < params_.p();
    std::uint64_t drawn = 0;
    if (success || track_links_) drawn = weights_.sample(index_u);
    advance(success, drawn, current);
  }

  void step(const rng::StepDraws& draws) { step(draws.coin, draws.index); }

  /// Advances with a prescribed coin outcome and memory index (test harness).
  void step_forced(bool success, std::uint64_t drawn) {
    if (drawn < 1 || drawn > n()) throw DomainError("forced index must lie in [1, n]");
    advance(success, drawn, n());
  }

 private:
  static constexpr std::uint32_t kSuccessBit = 0x80000000u;
  static constexpr std::uint32_t kIndexMask = 0x7FFFFFFFu;

  void advance(bool success, std::uint64_t drawn, std::uint64_t current) {
    const bool one = success && bits_.get(drawn);
    const double mu_new = weights_.mu_next();
    bits_.push_back(one);
    if (one) {
      ++s_;
      sigma_.add(mu_new);
      last_one_ = current + 1;
    }
    if (track_links_) {
      links_.push_back(static_cast<std::uint32_t>(drawn) | (success ? kSuccessBit : 0u));
    }
    weights_.grow();
    maybe_checkpoint();
  }

  void maybe_checkpoint() {
    const auto& pts = grid_.points();
    if (next_checkpoint_ < pts.size() && pts[next_checkpoint_] == n()) {
      checkpoints_.push_back({n(), s_, sigma(), martingale(), last_one_});
      ++next_checkpoint_;
    }
  }

  ModelParams params_;
  CheckpointGrid grid_;
  bool track_links_;
  CumulativeWeights weights_;
  PackedBits bits_;
  std::vector<std::uint32_t> links_;
  std::uint64_t s_ = 0;
  std::uint64_t last_one_ = 0;
  CompensatedSum sigma_;
  std::vector<Checkpoint> checkpoints_;
  std::size_t next_checkpoint_ = 0;
};

/// Runs replica `replica` of master seed `seed` to time n_max.
inline Trajectory simulate(const ModelParams& params, std::uint64_t n_max, std::uint64_t seed,
                           CheckpointGrid grid = {}, bool track_links = false, std::uint64_t replica = 0,
                           std::uint64_t memory_budget = kDefaultMemoryBudget) {
  if (n_max < 1) throw DomainError("simulate: n_max must be >= 1");
  check_budget(n_max, track_links, memory_budget);
  Trajectory traj(params, std::move(grid), track_links, n_max);
  const rng::StepStream stream(seed, replica);
  while (traj.n() < n_max) traj.step(stream.draws(traj.n()));
  return traj;
}

/// Rebuilds X from a link-tracked trajectory's coins and drawn indices.
inline PackedBits replay_bits(const Trajectory& traj) {
  PackedBits out;
  out.push_back(true);
  for (std::uint64_t k = 2; k <= traj.n(); ++k) {
    const StepLink l = traj.link(k);
    out.push_back(l.success && out.get(l.drawn));
  }
  return out;
}

struct ModifiedCheckpoint {
  std::uint64_t n = 0;
  std::uint64_t t = 0;
  double xi = 0.0;
  bool operator==(const ModifiedCheckpoint&) const = default;
};

/// The walk Y restricted to copy from 𝕊: Y_k = 0 for k < s1, Y_{s1} = 1, and
/// Y_{n+1} = x_{n+1} Y_{β̃_{n+1}} with probability p.
class ModifiedTrajectory {
 public:
  ModifiedTrajectory(ModelParams params, IndexSet index_set, CheckpointGrid grid = {}, std::uint64_t reserve = 0)
      : params_(params), set_(std::move(index_set)), grid_(std::move(grid)), weights_(params.beta(), reserve) {
    s1_ = set_.s1();
    bits_.reserve(reserve);
    bits_.push_back(s1_ == 1);
    maybe_checkpoint();
    while (bits_.size() < s1_) {
      weights_.grow();
      bits_.push_back(bits_.size() + 1 == s1_);
      maybe_checkpoint();
    }
    t_ = 1;
    xi_.add(mu(params_, s1_));
    // Re-record the checkpoint at s1 if the loop above logged it before Ξ was set.
    if (!checkpoints_.empty() && checkpoints_.back().n == s1_) checkpoints_.back() = {s1_, t_, xi()};
  }

  const ModelParams& params() const { return params_; }
  const IndexSet& index_set() const { return set_; }
  std::uint64_t s1() const { return s1_; }
  std::uint64_t n() const { return bits_.size(); }
  std::uint64_t t() const { return t_; }
  double xi() const { return xi_.value(); }
  bool y(std::uint64_t k) const { return bits_.get(k); }
  const std::vector<ModifiedCheckpoint>& checkpoints() const { return checkpoints_; }

  void step(double coin, double index_u) {
    const std::uint64_t current = n();
    bool one = false;
    if (coin < params_.p()) {
      const std::uint64_t k = modified_memory_sample(weights_, current, set_, index_u);
      one = k != 0 && set_.contains(current + 1) && bits_.get(k);
    }
    const double mu_new = weights_.mu_next();
    bits_.push_back(one);
    if (one) {
      ++t_;
      xi_.add(mu_new);
    }
    weights_.grow();
    maybe_checkpoint();
  }

  void step(const rng::StepDraws& draws) { step(draws.coin, draws.index); }

 private:
  void maybe_checkpoint() {
    const auto& pts = grid_.points();
    if (next_checkpoint_ < pts.size() && pts[next_checkpoint_] == n()) {
      checkpoints_.push_back({n(), t_, xi()});
      ++next_checkpoint_;
    }
  }

  ModelParams params_;
  IndexSet set_;
  CheckpointGrid grid_;
  CumulativeWeights weights_;
  PackedBits bits_;
  std::uint64_t s1_ = 1;
  std::uint64_t t_ = 0;
  CompensatedSum xi_;
  std::vector<ModifiedCheckpoint> checkpoints_;
  std::size_t next_checkpoint_ = 0;
};

inline ModifiedTrajectory simulate_modified(const ModelParams& params, const IndexSet& index_set,
                                            std::uint64_t n_max, std::uint64_t seed, CheckpointGrid grid = {},
                                            std::uint64_t replica = 0,
                                            std::uint64_t memory_budget = kDefaultMemoryBudget) {
  if (n_max < 1) throw DomainError("simulate_modified: n_max must be >= 1");
  const auto first = index_set.first();
  if (!first || *first > n_max) throw DomainError("simulate_modified: index set has no member <= n_max");
  check_budget(n_max, false, memory_budget);
  ModifiedTrajectory traj(params, index_set, std::move(grid), n_max);
  const rng::StepStream stream(seed, replica);
  while (traj.n() < n_max) traj.step(stream.draws(traj.n()));
  return traj;
}

}  // namespace uerw
