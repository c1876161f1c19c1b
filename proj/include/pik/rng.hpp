#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "pik/common.hpp"

namespace pik {

/// Deterministic RNG used everywhere.  xoshiro256++ seeded through
/// splitmix64, with hand-rolled samplers so that results are bit-identical
/// across standard libraries (std:: distributions are implementation
/// defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& si : s_) si = splitmix(x);
  }

  /// Derive an independent stream from a root seed, e.g. one per trial.
  static Rng stream(std::uint64_t root, std::uint64_t id) {
    std::uint64_t x = root;
    std::uint64_t a = splitmix(x);
    std::uint64_t y = id + 0x9e3779b97f4a7c15ULL;
    return Rng(a ^ splitmix(y));
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  Real uniform() { return Real(next() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1]; safe as a log() argument.
  Real uniform_pos() { return Real((next() >> 11) + 1) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    // Lemire rejection-free-ish reduction; unbiased via retry on the tail.
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next();
      __uint128_t m = (__uint128_t)r * n;
      if ((std::uint64_t)m >= threshold) return (std::uint64_t)(m >> 64);
    }
  }

  bool bernoulli(Real p) { return uniform() < p; }

  /// Standard normal (Box-Muller, one value per call).
  Real normal() {
    Real u = uniform_pos();
    Real v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586 * v);
  }

  /// Poisson(mean).  Knuth product method for small means, halving
  /// recursion for large ones (exact for all means, O(mean) time).
  std::uint64_t poisson(Real mean) {
    if (mean <= 0) return 0;
    std::uint64_t total = 0;
    while (mean > 32.0) {
      // Poisson(m) = Poisson(m/2) + Poisson(m/2) independently.
      Real half = mean / 2;
      total += poisson_small(half);
      mean -= half;
    }
    return total + poisson_small(mean);
  }

  /// Number of failures before the next success in a Bernoulli(p) sequence.
  /// Returns a huge value when p is so small the gap overflows.
  std::uint64_t geometric_gap(Real p) {
    if (p >= 1.0) return 0;
    if (p <= 0.0) return std::numeric_limits<std::uint64_t>::max();
    Real g = std::floor(std::log(uniform_pos()) / std::log1p(-p));
    if (g >= Real(std::numeric_limits<std::uint64_t>::max()))
      return std::numeric_limits<std::uint64_t>::max();
    return (std::uint64_t)g;
  }

 private:
  static std::uint64_t splitmix(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t poisson_small(Real mean) {
    Real limit = std::exp(-mean);
    Real prod = 1.0;
    std::uint64_t k = 0;
    for (;;) {
      prod *= uniform();
      if (prod <= limit) return k;
      ++k;
    }
  }

  std::uint64_t s_[4];
};

}  // namespace pik
