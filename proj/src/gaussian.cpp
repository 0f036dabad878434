#include "picm/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "picm/error.hpp"
#include "picm/fixed_math.hpp"

namespace picm {

namespace {

// Rational Chebyshev approximations for erf/erfc in the Cody style
// (the classic CALERF coefficient set), evaluated in a fixed order with the
// fixed exp kernel. Max relative error is near 1e-16 per branch.

constexpr double kErfA[5] = {3.16112374387056560e0, 1.13864154151050156e2,
                             3.77485237685302021e2, 3.20937758913846947e3,
                             1.85777706184603153e-1};
constexpr double kErfB[4] = {2.36012909523441209e1, 2.44024637934444173e2,
                             1.28261652607737228e3, 2.84423683343917062e3};
constexpr double kErfcC[9] = {5.64188496988670089e-1, 8.88314979438837594e0,
                              6.61191906371416295e1,  2.98635138197400131e2,
                              8.81952221241769090e2,  1.71204761263407058e3,
                              2.05107837782607147e3,  1.23033935479799725e3,
                              2.15311535474403846e-8};
constexpr double kErfcD[8] = {1.57449261107098347e1, 1.17693950891312499e2,
                              5.37181101862009858e2, 1.62138957456669019e3,
                              3.29079923573345963e3, 4.36261909014324716e3,
                              3.43936767414372164e3, 1.23033935480374942e3};
constexpr double kErfcP[6] = {3.05326634961232344e-1, 3.60344899949804439e-1,
                              1.25781726111229246e-1, 1.60837851487422766e-2,
                              6.58749161529837803e-4, 1.63153871373020978e-2};
constexpr double kErfcQ[5] = {2.56852019228982242e0, 1.87295284992346047e0,
                              5.27905102951428412e-1, 6.05183413124413191e-2,
                              2.33520497626869185e-3};
constexpr double kInvSqrtPi = 5.6418958354775628695e-1;

// exp(-y*y) split as exp(-ysq*ysq) * exp(-(y-ysq)(y+ysq)) with ysq a multiple
// of 1/16, which keeps big-argument rounding error down without extended
// precision.
double exp_neg_y2(double y) {
  double ysq = static_cast<double>(static_cast<int64_t>(y * 16.0)) / 16.0;
  double del = (y - ysq) * (y + ysq);
  return fixed_exp(-ysq * ysq) * fixed_exp(-del);
}

double erf_small(double x) {
  double z = x * x;
  double num = kErfA[4] * z;
  double den = z;
  for (int i = 0; i < 3; ++i) {
    num = (num + kErfA[i]) * z;
    den = (den + kErfB[i]) * z;
  }
  return x * (num + kErfA[3]) / (den + kErfB[3]);
}

double erfc_mid(double y) {
  double num = kErfcC[8] * y;
  double den = y;
  for (int i = 0; i < 7; ++i) {
    num = (num + kErfcC[i]) * y;
    den = (den + kErfcD[i]) * y;
  }
  return exp_neg_y2(y) * (num + kErfcC[7]) / (den + kErfcD[7]);
}

double erfc_far(double y) {
  double z = 1.0 / (y * y);
  double num = kErfcP[5] * z;
  double den = z;
  for (int i = 0; i < 4; ++i) {
    num = (num + kErfcP[i]) * z;
    den = (den + kErfcQ[i]) * z;
  }
  double r = z * (num + kErfcP[4]) / (den + kErfcQ[4]);
  return exp_neg_y2(y) * (kInvSqrtPi - r) / y;
}

double erfc_positive(double y) {
  if (y <= 0.46875) return 1.0 - erf_small(y);
  if (y <= 4.0) return erfc_mid(y);
  if (y >= 26.543) return 0.0;
  return erfc_far(y);
}

struct Moments {
  int64_t w = 0;   // sum f
  int64_t m1 = 0;  // sum f * x
  int64_t m2 = 0;  // sum f * x^2
};

Moments support_moments(const BinPmf& pmf, uint32_t lo, uint32_t hi) {
  const auto& f = *pmf.freqs;
  Moments mo;
  for (uint32_t k = lo; k < hi; ++k) {
    int64_t x = static_cast<int64_t>(k) - pmf.offset;
    int64_t fk = f[k];
    mo.w += fk;
    mo.m1 += fk * x;
    mo.m2 += fk * x * x;
  }
  return mo;
}

double moments_variance(const Moments& mo) {
  if (mo.w == 0) return 0.0;
  // w*m2 - m1^2 >= 0 exactly (Cauchy-Schwarz in integers), zero only for
  // point support.
  double num = static_cast<double>(mo.w * mo.m2 - mo.m1 * mo.m1);
  double w = static_cast<double>(mo.w);
  return num / (w * w);
}

void check_trit_support(const BinPmf& pmf) {
  uint32_t w = pmf.width();
  if (w < 3 || w % 3 != 0)
    fail(Errc::bad_argument, "support width " + std::to_string(w) + " has no trit split");
}

}  // namespace

double std_cdf(double x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  double t = -x * kInvSqrt2;
  double r = t >= 0.0 ? erfc_positive(t) : 2.0 - erfc_positive(-t);
  return 0.5 * r;
}

double kappa() {
  static const double k = [] {
    const double target = 0.5e-9;
    double a = 5.0, b = 7.0;  // std_cdf(-5) > target > std_cdf(-7)
    while (b - a > 1e-9) {
      double m = 0.5 * (a + b);
      if (std_cdf(-m) > target)
        a = m;
      else
        b = m;
    }
    return 0.5 * (a + b);
  }();
  return k;
}

int plane_length(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    fail(Errc::bad_argument, "scale must be positive and finite");
  double tail = 2.0 * kappa() * sigma;
  int len = 1;
  double p = 3.0;
  while (p < tail && len < 64) {
    p *= 3.0;
    ++len;
  }
  return len;
}

int64_t pow3(int n) {
  int64_t p = 1;
  for (int i = 0; i < n; ++i) p *= 3;
  return p;
}

std::vector<double> real_bin_masses(double sigma, int length) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    fail(Errc::bad_argument, "scale must be positive and finite");
  if (length < 1 || length > kMaxPlaneLength)
    fail(Errc::bad_argument, "plane length " + std::to_string(length) + " outside [1, " +
                                 std::to_string(kMaxPlaneLength) + "]");
  int64_t n = pow3(length);
  int64_t off = n / 2;
  std::vector<double> cdf(n + 1);
  for (int64_t k = 0; k <= n; ++k)
    cdf[k] = std_cdf((static_cast<double>(k) - 0.5 - off) / sigma);
  std::vector<double> mass(n);
  for (int64_t k = 0; k < n; ++k) mass[k] = cdf[k + 1] - cdf[k];
  return mass;
}

BinPmf build_pmf(double sigma, int length) {
  std::vector<double> mass = real_bin_masses(sigma, length);
  size_t n = mass.size();
  double total = std::accumulate(mass.begin(), mass.end(), 0.0);

  auto freqs = std::make_shared<std::vector<uint32_t>>(n);
  std::vector<double> rem(n);
  uint64_t assigned = 0;
  for (size_t k = 0; k < n; ++k) {
    double t = mass[k] / total * kFreqTotal;
    double fl = std::floor(t);
    (*freqs)[k] = static_cast<uint32_t>(fl);
    rem[k] = t - fl;
    assigned += (*freqs)[k];
  }

  // Largest remainder first; ties go to the lower index.
  uint64_t deficit = kFreqTotal - assigned;
  std::vector<uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  std::sort(idx.begin(), idx.end(), [&](uint32_t a, uint32_t b) {
    if (rem[a] != rem[b]) return rem[a] > rem[b];
    return a < b;
  });
  for (uint64_t i = 0; i < deficit; ++i) (*freqs)[idx[i]] += 1;

  // Raise empty bins to 1, taking from the currently largest bin each time so
  // the total stays exact. Ties pick the lower index.
  size_t zeros = 0;
  for (size_t k = 0; k < n; ++k) zeros += (*freqs)[k] == 0;
  if (zeros > 0) {
    auto order_below = [&](uint32_t a, uint32_t b) {
      if ((*freqs)[a] != (*freqs)[b]) return (*freqs)[a] < (*freqs)[b];
      return a > b;
    };
    std::priority_queue<uint32_t, std::vector<uint32_t>, decltype(order_below)> heap(order_below);
    for (uint32_t k = 0; k < n; ++k)
      if ((*freqs)[k] > 1) heap.push(k);
    while (zeros > 0) {
      if (heap.empty()) fail(Errc::bad_argument, "frequency floor unsatisfiable");
      uint32_t k = heap.top();
      heap.pop();
      (*freqs)[k] -= 1;
      --zeros;
      if ((*freqs)[k] > 1) heap.push(k);
    }
    for (size_t k = 0; k < n; ++k)
      if ((*freqs)[k] == 0) (*freqs)[k] = 1;
  }

  BinPmf pmf;
  pmf.length = length;
  pmf.offset = static_cast<int32_t>(pow3(length) / 2);
  pmf.lo = 0;
  pmf.hi = static_cast<uint32_t>(n);
  pmf.freqs = std::move(freqs);
  return pmf;
}

TritMasses trit_masses(const BinPmf& pmf) {
  check_trit_support(pmf);
  const auto& f = *pmf.freqs;
  uint32_t third = pmf.width() / 3;
  TritMasses tm{{0, 0, 0}, 0};
  for (int d = 0; d < 3; ++d) {
    uint32_t a = pmf.lo + d * third;
    uint32_t sum = 0;
    for (uint32_t k = a; k < a + third; ++k) sum += f[k];
    tm.m[d] = sum;
    tm.total += sum;
  }
  return tm;
}

TritMasses conditional_trit_pmf(const BinPmf& pmf, int plane) {
  if (plane < 1 || plane > pmf.length)
    fail(Errc::bad_argument, "plane index " + std::to_string(plane) + " outside [1, " +
                                 std::to_string(pmf.length) + "]");
  uint32_t expect = static_cast<uint32_t>(pow3(pmf.length - plane + 1));
  if (pmf.width() != expect)
    fail(Errc::bad_argument, "support width " + std::to_string(pmf.width()) +
                                 " does not match plane " + std::to_string(plane));
  return trit_masses(pmf);
}

BinPmf refine_interval(const BinPmf& pmf, int digit) {
  if (digit < 0 || digit > 2) fail(Errc::bad_argument, "digit must be 0, 1 or 2");
  check_trit_support(pmf);
  uint32_t third = pmf.width() / 3;
  BinPmf out = pmf;
  out.lo = pmf.lo + digit * third;
  out.hi = out.lo + third;
  return out;
}

double conditional_mean(const BinPmf& pmf) {
  Moments mo = support_moments(pmf, pmf.lo, pmf.hi);
  if (mo.w == 0) fail(Errc::bad_argument, "empty support");
  return static_cast<double>(mo.m1) / static_cast<double>(mo.w);
}

double conditional_variance(const BinPmf& pmf) {
  Moments mo = support_moments(pmf, pmf.lo, pmf.hi);
  if (mo.w == 0) fail(Errc::bad_argument, "empty support");
  return moments_variance(mo);
}

double bit_estimate(double value, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    fail(Errc::bad_argument, "scale must be positive and finite");
  // Fold to the lower tail so the mass is a difference of two small cdf
  // values rather than two values near one, which keeps far bins accurate
  // and makes the estimate exactly symmetric.
  double a = std::fabs(value);
  double mass = std_cdf((0.5 - a) / sigma) - std_cdf((-0.5 - a) / sigma);
  if (!(mass > 0.0)) return 64.0;
  double bits = -fixed_log2(mass);
  return bits > 64.0 ? 64.0 : bits;
}

TritStats trit_stats(const BinPmf& pmf) {
  check_trit_support(pmf);
  uint32_t third = pmf.width() / 3;
  TritStats st;
  Moments all;
  for (int d = 0; d < 3; ++d) {
    uint32_t a = pmf.lo + d * third;
    Moments mo = support_moments(pmf, a, a + third);
    st.masses.m[d] = static_cast<uint32_t>(mo.w);
    st.var_cond[d] = moments_variance(mo);
    all.w += mo.w;
    all.m1 += mo.m1;
    all.m2 += mo.m2;
  }
  st.masses.total = static_cast<uint32_t>(all.w);
  st.var_now = moments_variance(all);
  double h = 0.0;
  for (int d = 0; d < 3; ++d) {
    if (st.masses.m[d] == 0) continue;
    double p = static_cast<double>(st.masses.m[d]) / static_cast<double>(st.masses.total);
    h -= p * fixed_log2(p);
  }
  st.entropy_bits = h < 0.0 ? 0.0 : h;
  return st;
}

}  // namespace picm
