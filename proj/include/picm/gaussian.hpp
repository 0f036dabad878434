#pragma once

#include <cstdint>
#include <memory>
#include <vector>

namespace picm {

inline constexpr uint32_t kFreqTotal = 1u << 16;

// With kFreqTotal = 2^16 and a minimum frequency of 1 per bin, 3^L <= 2^16
// forces L <= 10 (scales up to roughly 4.8e3).
inline constexpr int kMaxPlaneLength = 10;

// Standard normal CDF from fixed-coefficient rational approximations
// (Cody-style erf/erfc) and the fixed exp kernel. |error| <= 1e-12 on [-8, 8];
// never calls platform libm, so results are identical on every IEEE host.
double std_cdf(double x);

// Solves std_cdf(-kappa) = 1e-9/2 by bisection to 1e-9; cached.
double kappa();

// Smallest L >= 1 with 3^L >= 2*kappa*sigma.
int plane_length(double sigma);

int64_t pow3(int n);

// Quantized Gaussian over 3^L integer bins with a refinable support window.
// freqs always holds the full-support frequencies; [lo, hi) narrows as digits
// become known. Bin k models the integer value k - offset.
struct BinPmf {
  int length = 0;
  int32_t offset = 0;
  uint32_t lo = 0;
  uint32_t hi = 0;
  std::shared_ptr<const std::vector<uint32_t>> freqs;

  uint32_t width() const { return hi - lo; }
};

// Integer frequencies sum to kFreqTotal exactly; every bin >= 1
// (largest-remainder rounding with a floor of one).
BinPmf build_pmf(double sigma, int length);

// Raw bin masses before normalization and quantization.
std::vector<double> real_bin_masses(double sigma, int length);

struct TritMasses {
  uint32_t m[3];
  uint32_t total;
};

// Masses of the three thirds of the current support.
TritMasses trit_masses(const BinPmf& pmf);

// Same, validating that the support matches plane index `plane` (1-based:
// planes 1..plane-1 already refined).
TritMasses conditional_trit_pmf(const BinPmf& pmf, int plane);

BinPmf refine_interval(const BinPmf& pmf, int digit);

// Mean / variance of the value k - offset under the support window.
double conditional_mean(const BinPmf& pmf);
double conditional_variance(const BinPmf& pmf);

// -log2 of the real mass of the unit bin around `value`; capped at 64 bits.
double bit_estimate(double value, double sigma);

// One-pass support statistics: trit masses, current variance, per-third
// variances, and the trit entropy in bits.
struct TritStats {
  TritMasses masses;
  double var_now = 0;
  double var_cond[3] = {0, 0, 0};
  double entropy_bits = 0;
};
TritStats trit_stats(const BinPmf& pmf);

}  // namespace picm
