#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tonematch {

// splitmix64 step; used to derive independent seeds from (seed, salt, salt).
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t s = seed;
  (void)splitmix64(s);
  s ^= a + 0x9e3779b97f4a7c15ull;
  (void)splitmix64(s);
  s ^= b + 0xbf58476d1ce4e5b9ull;
  return splitmix64(s);
}

// Deterministic draws layered over mt19937. The standard distribution
// classes are not pinned across library implementations, so the mapping
// from raw engine output to values is spelled out here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : gen_(static_cast<std::uint32_t>(seed ^ (seed >> 32))) {}

  std::uint32_t next_u32() { return gen_(); }

  // Uniform integer in [0, n), n >= 1. Rejection sampling, no modulo bias.
  std::uint32_t uniform_u32(std::uint32_t n) {
    if (n <= 1) return 0;
    const std::uint32_t limit = UINT32_MAX - UINT32_MAX % n;
    std::uint32_t v;
    do {
      v = next_u32();
    } while (v >= limit);
    return v % n;
  }

  // Uniform float in [0, 1) with 24 bits of resolution.
  float uniform() { return static_cast<float>(next_u32() >> 8) * (1.0f / 16777216.0f); }

  // Box-Muller; pairs cached so consecutive draws stay cheap.
  float normal(float mean, float stddev) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    const double u1 = (static_cast<double>(next_u32()) + 0.5) * (1.0 / 4294967296.0);
    const double u2 = (static_cast<double>(next_u32()) + 0.5) * (1.0 / 4294967296.0);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = static_cast<float>(r * std::sin(a));
    have_spare_ = true;
    return mean + stddev * static_cast<float>(r * std::cos(a));
  }

 private:
  std::mt19937 gen_;
  bool have_spare_ = false;
  float spare_ = 0.0f;
};

}  // namespace tonematch
