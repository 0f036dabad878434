#pragma once

// Self-contained exp/log kernels with fixed coefficients. The coding path may
// not call the platform libm: last-ulp differences between math libraries would
// change plane lengths, frequencies and symbol order, i.e. the bytes on the
// wire. Everything here is plain IEEE double arithmetic in a fixed order.

#include <bit>
#include <cstdint>
#include <limits>

namespace picm {

namespace detail {

// 2^e for e in [-1074, 1023].
inline double pow2i(int e) {
  if (e >= -1022) return std::bit_cast<double>(static_cast<uint64_t>(e + 1023) << 52);
  // Subnormal result: scale in two steps.
  return std::bit_cast<double>(static_cast<uint64_t>(1) << 52) *
         std::bit_cast<double>(static_cast<uint64_t>(e + 1022 + 1023) << 52);
}

}  // namespace detail

// exp(x), relative error below 1e-15 over the normal range.
inline double fixed_exp(double x) {
  if (x != x) return x;
  if (x > 709.782712893384) return std::numeric_limits<double>::infinity();
  if (x < -745.2) return 0.0;
  constexpr double kInvLn2 = 1.4426950408889634074;
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  double t = x * kInvLn2;
  int k = static_cast<int>(t >= 0 ? t + 0.5 : t - 0.5);
  double r = (x - k * kLn2Hi) - k * kLn2Lo;
  // Taylor series to r^13; |r| <= 0.3466 keeps the truncation below 5e-18.
  double p = 1.0 / 6227020800.0;
  p = p * r + 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  if (k < -1070) return 0.0;
  if (k > 1023) return std::numeric_limits<double>::infinity();
  return p * detail::pow2i(k);
}

// Natural log, relative error below 1e-15. x must be positive and finite;
// edge inputs follow libm conventions.
inline double fixed_log(double x) {
  if (x != x) return x;
  if (x < 0.0) return std::numeric_limits<double>::quiet_NaN();
  if (x == 0.0) return -std::numeric_limits<double>::infinity();
  if (x == std::numeric_limits<double>::infinity()) return x;
  int e = 0;
  if (x < 2.2250738585072014e-308) {  // subnormal: renormalize
    x *= 9007199254740992.0;          // 2^53
    e -= 53;
  }
  uint64_t bits = std::bit_cast<uint64_t>(x);
  e += static_cast<int>((bits >> 52) & 0x7FF) - 1023;
  double m = std::bit_cast<double>((bits & 0x000FFFFFFFFFFFFFull) | 0x3FF0000000000000ull);
  if (m > 1.4142135623730951) {
    m *= 0.5;
    e += 1;
  }
  // atanh series: ln m = 2z * sum z^2j/(2j+1), z = (m-1)/(m+1), |z| <= 0.1716.
  double z = (m - 1.0) / (m + 1.0);
  double z2 = z * z;
  double s = 1.0 / 19.0;
  s = s * z2 + 1.0 / 17.0;
  s = s * z2 + 1.0 / 15.0;
  s = s * z2 + 1.0 / 13.0;
  s = s * z2 + 1.0 / 11.0;
  s = s * z2 + 1.0 / 9.0;
  s = s * z2 + 1.0 / 7.0;
  s = s * z2 + 1.0 / 5.0;
  s = s * z2 + 1.0 / 3.0;
  s = s * z2 + 1.0;
  double lnm = 2.0 * z * s;
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  return e * kLn2Hi + (e * kLn2Lo + lnm);
}

inline double fixed_log2(double x) {
  return fixed_log(x) * 1.4426950408889634074;
}

}  // namespace picm
