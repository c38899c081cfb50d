#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace relcomp {

// Deterministic random source. xoshiro256++ seeded through splitmix64, with
// explicit stream derivation so independent pieces of work (per hop, per
// evidence row) draw from disjoint streams no matter how work is scheduled.
//
// All sampling helpers are implemented by hand: the std::*_distribution
// classes are implementation-defined, and artifacts produced here must be
// reproducible bit-for-bit across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
  }

  // Derives a child seed from a parent seed and a path of indices, e.g.
  // derive(seed, hop, row). Order-sensitive and collision-resistant enough
  // for stream splitting.
  static uint64_t derive(uint64_t seed, std::initializer_list<uint64_t> path) {
    uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
    for (uint64_t p : path) {
      h = splitmix64(h);
      h ^= p + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return splitmix64(h);
  }

  uint64_t next() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1). 53-bit mantissa.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n) without modulo bias (n > 0).
  uint64_t below(uint64_t n) {
    const uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  // Inclusive integer range [lo, hi].
  int64_t range(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  // Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Fisher-Yates shuffle over indices [0, n).
  template <typename Vec>
  void shuffle(Vec& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t s_[4];
};

}  // namespace relcomp
