#pragma once

#include <cstdint>
#include <limits>

namespace faircrop {

/// Pinned pseudo-random generator used for every seeded decision in the
/// library (sampling focal points, drawing audit pairs, synthetic corpora).
///
/// The algorithm is SplitMix64: a Weyl sequence with increment
/// 0x9E3779B97F4A7C15 whose state is passed through the finalizer
///
///     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///     z =  z ^ (z >> 31)
///
/// Bounded integers use rejection sampling (reject draws below
/// `(2^64 - n) mod n`, then take `x mod n`), and unit doubles take the top
/// 53 bits. Nothing here depends on the standard library's distributions,
/// so sequences are identical across platforms and languages.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Rng(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    state_ += kGolden;
    return finalize(state_);
  }

  /// Uniform integer in [0, n). Requires n >= 1.
  constexpr std::uint64_t uniform_index(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = (*this)();
      if (x >= threshold) return x % n;
    }
  }

  /// Uniform double in [0, 1).
  constexpr double uniform_unit() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  static constexpr std::uint64_t finalize(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

 private:
  std::uint64_t state_;
};

/// Seed for stream `index` under `master`. Streams for distinct indices are
/// decorrelated, so trial i can be run on any thread and get the same draws.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return Rng::finalize(master ^ Rng::finalize(index * Rng::kGolden + 0x632BE59BD9B4E019ULL));
}

}  // namespace faircrop
