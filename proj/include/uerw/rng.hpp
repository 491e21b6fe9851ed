#pragma once

// Counter-based randomness. Every variate is a pure function of
// (master seed, replica, step), so trajectories do not depend on thread
// scheduling and two processes can be coupled step by step.

#include <array>
#include <cstdint>

namespace uerw::rng {

/// Philox4x32 with 10 rounds (Salmon et al., Random123).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Stream key of replica r: mix64(mix64(master) + r · golden).
constexpr std::uint64_t replica_key(std::uint64_t master_seed, std::uint64_t replica) {
  return mix64(mix64(master_seed) + replica * 0x9E3779B97F4A7C15ull);
}

/// Uniform on [0, 1) with 53 random bits.
constexpr double to_unit_closed_open(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Uniform on (0, 1) with 52 random bits.
constexpr double to_unit_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// The two variates consumed by one walk step, in fixed order.
struct StepDraws {
  double coin;   // in [0, 1); success iff coin < p
  double index;  // in (0, 1); inverse-CDF input for the memory index
};

/// Deterministic per-replica variate source keyed by step number.
class StepStream {
 public:
  constexpr StepStream(std::uint64_t master_seed, std::uint64_t replica)
      : key_(replica_key(master_seed, replica)) {}

  /// Draws for the transition n -> n + 1.
  constexpr StepDraws draws(std::uint64_t n) const {
    const Philox4x32::Counter out = Philox4x32::generate(
        {static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n >> 32), 0u, 0u},
        {static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)});
    const std::uint64_t w0 = (std::uint64_t{out[0]} << 32) | out[1];
    const std::uint64_t w1 = (std::uint64_t{out[2]} << 32) | out[3];
    return {to_unit_closed_open(w0), to_unit_open(w1)};
  }

  constexpr std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace uerw::rng
