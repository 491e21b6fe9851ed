#pragma once

// Ancestry forest of a link-tracked walk.
//
// Site k is a child of j when step k copied from j. In the default
// (effective) mode only successful copies of a 1 count, so the nodes are
// exactly the 1-sites and every 1-site descends from site 1. The raw mode
// links every k >= 2 to its drawn index regardless of the coin.
//
// η^{(m)} is generation m (η^{(0)} = {1}); ζ^{(m,j)} is the j-th member of
// η^{(m)} (in increasing order) together with all its descendants.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

#include "uerw/errors.hpp"
#include "uerw/walker.hpp"

namespace uerw {

enum class LinkMode { kEffective, kRawDraw };

class AncestryForest {
 public:
  static constexpr std::uint32_t kNoParent = 0;

  LinkMode mode() const { return mode_; }
  std::uint64_t horizon() const { return parent_.size() - 1; }
  double theta() const { return theta_; }

  bool is_node(std::uint64_t k) const { return k >= 1 && k <= horizon() && level_[k] >= 0; }
  std::uint64_t parent(std::uint64_t k) const { return parent_.at(k); }
  int level(std::uint64_t k) const { return level_.at(k); }
  std::size_t level_count() const { return levels_.size(); }
  /// Generation m over the whole horizon, increasing.
  const std::vector<std::uint32_t>& generation(std::size_t m) const { return levels_.at(m); }
  std::span<const std::uint32_t> children(std::uint64_t k) const {
    return {child_list_.data() + child_offset_[k], child_list_.data() + child_offset_[k + 1]};
  }
  std::uint64_t node_count(std::uint64_t n) const {
    std::uint64_t total = 0;
    for (std::uint64_t k = 1; k <= std::min(n, horizon()); ++k) total += is_node(k) ? 1 : 0;
    return total;
  }

 private:
  friend AncestryForest build_forest(const Trajectory& traj, LinkMode mode);

  LinkMode mode_ = LinkMode::kEffective;
  double theta_ = 0.0;
  std::vector<std::uint32_t> parent_;  // index 0 unused
  std::vector<int> level_;             // -1 for non-nodes
  std::vector<std::uint64_t> child_offset_;
  std::vector<std::uint32_t> child_list_;
  std::vector<std::vector<std::uint32_t>> levels_;
};

inline AncestryForest build_forest(const Trajectory& traj, LinkMode mode = LinkMode::kEffective) {
  if (!traj.tracks_links()) throw DomainError("build_forest: trajectory has no link record");
  const std::uint64_t n = traj.n();
  AncestryForest f;
  f.mode_ = mode;
  f.theta_ = traj.params().theta();
  f.parent_.assign(n + 1, AncestryForest::kNoParent);
  f.level_.assign(n + 1, -1);
  f.level_[1] = 0;
  f.levels_.push_back({1});
  std::vector<std::uint64_t> child_count(n + 2, 0);
  for (std::uint64_t k = 2; k <= n; ++k) {
    const StepLink link = traj.link(k);
    bool edge = false;
    if (mode == LinkMode::kEffective) {
      edge = traj.x(k);
      if (edge && !(link.success && traj.x(link.drawn))) {
        throw InternalError("1-site without a successful copy of a 1");
      }
    } else {
      edge = true;
    }
    if (!edge) continue;
    const std::uint64_t j = link.drawn;
    f.parent_[k] = static_cast<std::uint32_t>(j);
    const int lvl = f.level_[j] + 1;
    f.level_[k] = lvl;
    if (static_cast<std::size_t>(lvl) >= f.levels_.size()) f.levels_.resize(lvl + 1);
    f.levels_[lvl].push_back(static_cast<std::uint32_t>(k));
    ++child_count[j];
  }
  f.child_offset_.assign(n + 2, 0);
  for (std::uint64_t k = 1; k <= n; ++k) f.child_offset_[k + 1] = f.child_offset_[k] + child_count[k];
  f.child_list_.resize(f.child_offset_[n + 1]);
  std::vector<std::uint64_t> fill(f.child_offset_.begin(), f.child_offset_.end() - 1);
  for (std::uint64_t k = 2; k <= n; ++k) {
    if (f.level_[k] > 0) f.child_list_[fill[f.parent_[k]]++] = static_cast<std::uint32_t>(k);
  }
  return f;
}

/// η^{(m)}_n.
inline std::vector<std::uint64_t> level_set(const AncestryForest& forest, std::size_t m, std::uint64_t n) {
  if (n > forest.horizon()) throw DomainError("level_set: n beyond the forest horizon");
  std::vector<std::uint64_t> out;
  if (m >= forest.level_count()) return out;
  for (std::uint32_t k : forest.generation(m)) {
    if (k > n) break;
    out.push_back(k);
  }
  return out;
}

/// ζ^{(m,j)}_n for 1-based j, sorted.
inline std::vector<std::uint64_t> cluster(const AncestryForest& forest, std::size_t m, std::size_t j,
                                          std::uint64_t n) {
  if (n > forest.horizon()) throw DomainError("cluster: n beyond the forest horizon");
  const std::size_t available = m < forest.level_count() ? forest.generation(m).size() : 0;
  if (j < 1 || j > available) {
    throw DomainError("cluster: index j = " + std::to_string(j) + " out of range for level " + std::to_string(m));
  }
  const std::uint64_t root = forest.generation(m)[j - 1];
  std::vector<std::uint64_t> out;
  if (root > n) return out;
  std::vector<std::uint64_t> stack = {root};
  while (!stack.empty()) {
    const std::uint64_t k = stack.back();
    stack.pop_back();
    out.push_back(k);
    for (std::uint32_t child : forest.children(k)) {
      if (child <= n) stack.push_back(child);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Checks that the nodes up to n are exactly η^{(0)}_n ∪ η^{(1)}_n ∪ ⋃_j ζ^{(1,j)}_n
/// and that the level-1 clusters are pairwise disjoint.
inline bool decomposition_check(const AncestryForest& forest, std::uint64_t n) {
  if (n > forest.horizon()) throw DomainError("decomposition_check: n beyond the forest horizon");
  std::vector<std::uint8_t> covered(n + 1, 0);
  bool disjoint = true;
  for (std::uint64_t k : level_set(forest, 0, n)) covered[k] = 1;
  const auto first_gen = level_set(forest, 1, n);
  for (std::size_t j = 1; j <= first_gen.size(); ++j) {
    for (std::uint64_t k : cluster(forest, 1, j, n)) {
      if (covered[k] && forest.level(k) != 1) disjoint = false;
      covered[k] = 1;
    }
  }
  for (std::uint64_t k = 1; k <= n; ++k) {
    if (static_cast<bool>(covered[k]) != forest.is_node(k)) return false;
  }
  return disjoint;
}

/// Level-m clusters with at least one member in (n − window, n].
inline std::uint64_t surviving_cluster_count(const AncestryForest& forest, std::size_t m, std::uint64_t n,
                                             std::uint64_t window) {
  if (window >= n) throw DomainError("surviving_cluster_count: window must be < n");
  if (n > forest.horizon()) throw DomainError("surviving_cluster_count: n beyond the forest horizon");
  std::unordered_set<std::uint64_t> roots;
  for (std::uint64_t k = n - window + 1; k <= n; ++k) {
    if (!forest.is_node(k) || forest.level(k) < static_cast<int>(m)) continue;
    std::uint64_t a = k;
    for (int up = forest.level(k) - static_cast<int>(m); up > 0; --up) a = forest.parent(a);
    roots.insert(a);
  }
  return roots.size();
}

/// #ζ^{(m,j)}_n / n^θ at each grid point.
inline std::vector<double> cluster_growth_profile(const AncestryForest& forest, std::size_t m, std::size_t j,
                                                  std::span<const std::uint64_t> grid) {
  const auto members = cluster(forest, m, j, forest.horizon());
  std::vector<double> out;
  out.reserve(grid.size());
  for (std::uint64_t n : grid) {
    const auto size = static_cast<double>(std::upper_bound(members.begin(), members.end(), n) - members.begin());
    out.push_back(size / std::pow(static_cast<double>(n), forest.theta()));
  }
  return out;
}

}  // namespace uerw
