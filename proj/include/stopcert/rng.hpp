#pragma once

// Deterministic random streams for the simulator and experiments.
//
// Algorithm (pinned, versioned as "splitmix64-v1"): the generator is
// SplitMix64; substreams are derived counter-style, seed_i = finalize(master
// + GOLDEN * (index + 1)). Every trajectory draws only from its own
// substream, so generated datasets are independent of evaluation order and
// worker count, and identical across platforms.

#include <cstdint>

namespace stopcert {

inline constexpr const char* kRngVersion = "splitmix64-v1";

namespace detail {
inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}
}  // namespace detail

// Derives the seed of substream `index` from a master seed.
inline std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t index) {
  return detail::mix64(master + detail::kGolden * (index + 1));
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += detail::kGolden);
    return detail::mix64(z);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_unit() < p; }

  // Unbiased uniform index in [0, n) (Lemire rejection method).
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::uint64_t state_;
};

}  // namespace stopcert
