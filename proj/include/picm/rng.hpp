#pragma once

// Deterministic sampling helpers. std::normal_distribution and std::shuffle
// are implementation-defined, so grids generated through them would differ
// between standard libraries. mt19937_64 itself is pinned by the standard.

#include <cstdint>
#include <random>

#include "picm/fixed_math.hpp"

namespace picm {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Standard normal via the polar method; sqrt is correctly rounded IEEE,
  // the log comes from the fixed kernel.
  double normal() {
    for (;;) {
      double v1 = 2.0 * uniform() - 1.0;
      double v2 = 2.0 * uniform() - 1.0;
      double s = v1 * v1 + v2 * v2;
      if (s >= 1.0 || s == 0.0) continue;
      double f = ieee_sqrt(-2.0 * fixed_log(s) / s);
      return v1 * f;
    }
  }

  uint64_t next_u64() { return gen_(); }

  // Uniform integer in [0, n) without modulo bias.
  uint64_t below(uint64_t n) {
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = gen_();
      if (r >= threshold) return r % n;
    }
  }

 private:
  static double ieee_sqrt(double x) {
    return __builtin_sqrt(x);  // single hardware instruction, correctly rounded
  }
  std::mt19937_64 gen_;
};

}  // namespace picm
