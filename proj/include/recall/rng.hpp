#pragma once

#include <cstdint>

namespace recall {

// Deterministic 64-bit PRNG (splitmix64). Every seeded draw in the toolkit
// goes through this generator so that runs reproduce bit-for-bit across
// platforms and standard-library versions (std::mt19937 distributions are
// not portable across implementations).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform integer in [0, n). Rejection sampling keeps the draw unbiased.
  std::uint64_t below(std::uint64_t n) {
    constexpr std::uint64_t kMask = ~0ULL;
    const std::uint64_t lim = kMask - (kMask % n);
    for (;;) {
      const std::uint64_t r = next();
      if (r < lim) return r % n;
    }
  }

  // Uniform double in [0, 1).
  double unit() { return static_cast<double>(next()) * 0x1.0p-64; }

 private:
  std::uint64_t state_;
};

}  // namespace recall
