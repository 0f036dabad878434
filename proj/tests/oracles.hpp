#pragma once

// Reference implementations the tests trust instead of the library under
// test. They favor clarity and brute force over speed.

#include <cmath>
#include <cstdint>
#include <vector>

namespace refimpl {

// Standard normal CDF through glibc's long-double erfc, a different
// algorithm than the library's rational approximation.
inline long double o_ncdf(long double x) {
  const long double inv_sqrt2 = 0.7071067811865475244008443621048490393L;
  return 0.5L * erfcl(-x * inv_sqrt2);
}

// Bisection solve of o_ncdf(-k) = half_tail on [lo, hi].
inline long double o_tail_inverse(long double half_tail, long double lo, long double hi) {
  for (int i = 0; i < 200; ++i) {
    long double m = 0.5L * (lo + hi);
    if (o_ncdf(-m) > half_tail)
      lo = m;
    else
      hi = m;
  }
  return 0.5L * (lo + hi);
}

// Base-3 digits of v, most significant first.
inline std::vector<int> o_base3(int64_t v, int digits) {
  std::vector<int> out(digits);
  for (int i = digits - 1; i >= 0; --i) {
    out[i] = int(v % 3);
    v /= 3;
  }
  return out;
}

inline int64_t o_pow3(int n) {
  int64_t p = 1;
  for (int i = 0; i < n; ++i) p *= 3;
  return p;
}

// Discrete moments of a frequency window [lo, hi) over symbol values 0..n-1.
struct WindowMoments {
  long double total = 0, mean = 0, var = 0;
};

inline WindowMoments o_window_moments(const std::vector<uint32_t>& freqs, int64_t lo, int64_t hi) {
  WindowMoments m;
  for (int64_t s = lo; s < hi; ++s) m.total += freqs[size_t(s)];
  if (m.total == 0) return m;
  for (int64_t s = lo; s < hi; ++s) m.mean += (long double)(s) * freqs[size_t(s)];
  m.mean /= m.total;
  for (int64_t s = lo; s < hi; ++s) {
    long double d = (long double)(s)-m.mean;
    m.var += d * d * freqs[size_t(s)];
  }
  m.var /= m.total;
  return m;
}

// Shannon entropy in bits of the trit split of window [lo, hi) into thirds.
inline long double o_trit_entropy(const std::vector<uint32_t>& freqs, int64_t lo, int64_t hi) {
  int64_t w = (hi - lo) / 3;
  long double masses[3] = {0, 0, 0};
  long double total = 0;
  for (int t = 0; t < 3; ++t)
    for (int64_t s = lo + t * w; s < lo + (t + 1) * w; ++s) masses[t] += freqs[size_t(s)];
  total = masses[0] + masses[1] + masses[2];
  long double h = 0;
  for (int t = 0; t < 3; ++t) {
    if (masses[t] == 0) continue;
    long double p = masses[t] / total;
    h -= p * logl(p) / logl(2.0L);
  }
  return h;
}

inline long double o_population_std(const std::vector<long double>& v) {
  long double mean = 0;
  for (long double x : v) mean += x;
  mean /= (long double)(v.size());
  long double var = 0;
  for (long double x : v) var += (x - mean) * (x - mean);
  var /= (long double)(v.size());
  return sqrtl(var);
}

}  // namespace refimpl
