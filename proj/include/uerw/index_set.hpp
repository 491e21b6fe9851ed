#pragma once

// Restriction sets 𝕊 ⊆ ℕ for the modified walk.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uerw/errors.hpp"

namespace uerw {

class IndexSet {
 public:
  static constexpr std::uint64_t kUnbounded = std::numeric_limits<std::uint64_t>::max();

  enum class Kind { kAll, kMembers, kComplement, kPredicate };

  /// 𝕊 = ℕ.
  static IndexSet all() { return IndexSet(Kind::kAll, {}, {}, kUnbounded, "all"); }

  /// {first, first + step, first + 2·step, ...}.
  static IndexSet arithmetic(std::uint64_t first, std::uint64_t step) {
    if (first < 1 || step < 1) throw DomainError("arithmetic index set needs first >= 1, step >= 1");
    return IndexSet(
        Kind::kPredicate, {},
        [first, step](std::uint64_t k) { return k >= first && (k - first) % step == 0; }, kUnbounded,
        "arith:" + std::to_string(first) + "," + std::to_string(step));
  }

  /// Explicit members, valid for indices up to `horizon`.
  static IndexSet from_members(std::vector<std::uint64_t> members, std::uint64_t horizon) {
    validate_sorted(members, "members");
    if (!members.empty() && members.back() > horizon) {
      throw DomainError("index set member beyond its horizon");
    }
    return IndexSet(Kind::kMembers, std::move(members), {}, horizon, "members");
  }

  /// ℕ minus the listed indices.
  static IndexSet complement_of(std::vector<std::uint64_t> excluded) {
    validate_sorted(excluded, "excluded indices");
    return IndexSet(Kind::kComplement, std::move(excluded), {}, kUnbounded, "complement");
  }

  /// Membership predicate documented up to `horizon`.
  static IndexSet from_predicate(std::function<bool(std::uint64_t)> predicate, std::uint64_t horizon,
                                 std::string description) {
    if (!predicate) throw DomainError("index set predicate is empty");
    return IndexSet(Kind::kPredicate, {}, std::move(predicate), horizon, std::move(description));
  }

  Kind kind() const { return kind_; }
  std::uint64_t horizon() const { return horizon_; }
  const std::string& description() const { return description_; }
  const std::vector<std::uint64_t>& listed() const { return listed_; }

  /// Whether k ∈ 𝕊; index 0 is never a member.
  bool contains(std::uint64_t k) const {
    if (k == 0) return false;
    if (k > horizon_) throw DomainError("index set queried beyond its horizon " + std::to_string(horizon_));
    switch (kind_) {
      case Kind::kAll: return true;
      case Kind::kMembers: return std::binary_search(listed_.begin(), listed_.end(), k);
      case Kind::kComplement: return !std::binary_search(listed_.begin(), listed_.end(), k);
      case Kind::kPredicate: return predicate_(k);
    }
    return false;
  }

  /// Smallest member; nullopt when 𝕊 is empty up to the horizon.
  std::optional<std::uint64_t> first() const { return s1_; }

  std::uint64_t s1() const {
    if (!s1_) throw DomainError("index set is empty");
    return *s1_;
  }

  /// m_n = #{k : s1 < k <= n, k ∉ 𝕊}.
  std::uint64_t deficiency(std::uint64_t n) const {
    const std::uint64_t start = s1();
    if (n <= start) return 0;
    switch (kind_) {
      case Kind::kAll: return 0;
      case Kind::kMembers: {
        const auto lo = std::upper_bound(listed_.begin(), listed_.end(), start);
        const auto hi = std::upper_bound(listed_.begin(), listed_.end(), n);
        return (n - start) - static_cast<std::uint64_t>(hi - lo);
      }
      case Kind::kComplement: {
        const auto lo = std::upper_bound(listed_.begin(), listed_.end(), start);
        const auto hi = std::upper_bound(listed_.begin(), listed_.end(), n);
        return static_cast<std::uint64_t>(hi - lo);
      }
      case Kind::kPredicate: {
        std::uint64_t missing = 0;
        for (std::uint64_t k = start + 1; k <= n; ++k) missing += contains(k) ? 0 : 1;
        return missing;
      }
    }
    return 0;
  }

  /// Smallest N0 <= horizon with m_n <= n^θ for every n in [N0, horizon].
  std::optional<std::uint64_t> find_n0(double theta, std::uint64_t horizon) const {
    if (horizon < 1) throw DomainError("find_n0: horizon must be >= 1");
    const std::uint64_t start = s1();
    std::uint64_t last_violation = 0;
    std::uint64_t missing = 0;
    for (std::uint64_t n = start + 1; n <= horizon; ++n) {
      if (!contains(n)) ++missing;
      if (static_cast<double>(missing) > std::pow(static_cast<double>(n), theta)) last_violation = n;
    }
    if (last_violation == horizon) return std::nullopt;
    return last_violation + 1;
  }

  /// Whether m_n <= n^θ holds for all n0 <= n <= horizon.
  bool condA_check(double theta, std::uint64_t n0, std::uint64_t horizon) const {
    const auto found = find_n0(theta, horizon);
    return found.has_value() && *found <= std::max<std::uint64_t>(n0, 1);
  }

 private:
  IndexSet(Kind kind, std::vector<std::uint64_t> listed, std::function<bool(std::uint64_t)> predicate,
           std::uint64_t horizon, std::string description)
      : kind_(kind),
        listed_(std::move(listed)),
        predicate_(std::move(predicate)),
        horizon_(horizon),
        description_(std::move(description)) {
    s1_ = locate_first();
  }

  static void validate_sorted(const std::vector<std::uint64_t>& v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < 1) throw DomainError(std::string(what) + " must be >= 1");
      if (i > 0 && v[i] <= v[i - 1]) throw DomainError(std::string(what) + " must be strictly increasing");
    }
  }

  std::optional<std::uint64_t> locate_first() const {
    switch (kind_) {
      case Kind::kAll: return 1;
      case Kind::kMembers:
        if (listed_.empty()) return std::nullopt;
        return listed_.front();
      case Kind::kComplement: {
        std::uint64_t k = 1;
        for (std::uint64_t x : listed_) {
          if (x != k) break;
          ++k;
        }
        return k;
      }
      case Kind::kPredicate: {
        // Scans at most 2^32 candidates for unbounded predicates.
        const std::uint64_t limit = std::min<std::uint64_t>(horizon_, std::uint64_t{1} << 32);
        for (std::uint64_t k = 1; k <= limit; ++k) {
          if (predicate_(k)) return k;
        }
        return std::nullopt;
      }
    }
    return std::nullopt;
  }

  Kind kind_;
  std::vector<std::uint64_t> listed_;
  std::function<bool(std::uint64_t)> predicate_;
  std::uint64_t horizon_;
  std::string description_;
  std::optional<std::uint64_t> s1_;
};

}  // namespace uerw
