#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "picm/error.hpp"
#include "picm/fixed_math.hpp"
#include "picm/gaussian.hpp"
#include "picm/rng.hpp"
#include "picm/tensor.hpp"

using namespace picm;

namespace {

BinPmf hand_pmf(std::vector<uint32_t> freqs, int length) {
  BinPmf p;
  p.length = length;
  p.offset = int32_t(pow3(length) / 2);
  p.lo = 0;
  p.hi = uint32_t(freqs.size());
  p.freqs = std::make_shared<const std::vector<uint32_t>>(std::move(freqs));
  return p;
}

}  // namespace

TEST_CASE("normal cdf matches frozen references") {
  CHECK(std_cdf(0.0) == 0.5);
  CHECK(std::fabs(std_cdf(0.5) - 0.6914624612740131) < 1e-12);
  CHECK(std::fabs(std_cdf(1.0) - 0.84134474606854295) < 1e-12);
  CHECK(std::fabs(std_cdf(-2.5) - 0.0062096653257761352) < 1e-12);
  CHECK(std::fabs(std_cdf(3.25) - 0.99942297495760923) < 1e-12);
  CHECK(std::fabs(std_cdf(0.0078125) - 0.50311670486084258) < 1e-12);
}

TEST_CASE("normal cdf tracks the long-double reference across [-8, 8]") {
  for (int i = 0; i <= 1600; ++i) {
    double x = -8.0 + i * 0.01;
    double got = std_cdf(x);
    long double want = refimpl::o_ncdf(x);
    CHECK(std::fabs(double(got - want)) < 1e-12);
  }
}

TEST_CASE("normal cdf symmetry and monotonicity") {
  Rng rng(4);
  double prev = std_cdf(-10.0);
  for (int i = 0; i < 500; ++i) {
    double x = -10.0 + i * 0.04;
    double v = std_cdf(x);
    CHECK(v >= prev);
    prev = v;
  }
  for (int i = 0; i < 200; ++i) {
    double x = (rng.uniform() - 0.5) * 12.0;
    CHECK(std::fabs(std_cdf(x) + std_cdf(-x) - 1.0) < 1e-14);
  }
}

TEST_CASE("kappa solves its defining tail equation") {
  double k = kappa();
  double tail = std_cdf(-k);
  CHECK(tail >= 4.999e-10);
  CHECK(tail <= 5.001e-10);
  CHECK(k > 6.0);
  CHECK(std::fabs(k - 6.1094102048693971) < 1e-3);
  long double oracle = refimpl::o_tail_inverse(5e-10L, 5.0L, 7.0L);
  CHECK(std::fabs(double(k - oracle)) < 1e-6);
}

TEST_CASE("plane length allocation") {
  CHECK(plane_length(1.0) == 3);
  CHECK(plane_length(0.01) == 1);
  CHECK(plane_length(kScaleFloor) == 1);

  int prev = 1;
  for (double s = 0.01; s < 1000.0; s *= 1.07) {
    int L = plane_length(s);
    CHECK(L >= prev);
    prev = L;
  }

  for (int L = 1; L <= 6; ++L) {
    double boundary = double(pow3(L)) / (2.0 * kappa());
    CHECK(plane_length(boundary * (1.0 - 1e-12)) == L);
    CHECK(plane_length(boundary * (1.0 + 1e-12)) == L + 1);
  }

  // Tripling a scale that sits just inside a power-of-3 boundary adds
  // exactly one digit.
  double s0 = 3.0 / (2.0 * kappa()) * 0.9999999;
  CHECK(plane_length(s0) == 1);
  CHECK(plane_length(3.0 * s0) == 2);

  CHECK_THROWS_AS(plane_length(0.0), Error);
  CHECK_THROWS_AS(plane_length(-1.0), Error);
}

TEST_CASE("integer pmf conserves total frequency with a floor of one") {
  Rng rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    double sigma = fixed_exp((rng.uniform() * 2.0 - 1.0) * 4.0);
    int L = plane_length(sigma);
    BinPmf p = build_pmf(sigma, L);
    uint64_t total = 0;
    uint32_t minf = 0xFFFFFFFFu;
    for (uint32_t f : *p.freqs) {
      total += f;
      minf = f < minf ? f : minf;
    }
    CHECK(total == kFreqTotal);
    CHECK(minf >= 1);
    CHECK(p.freqs->size() == size_t(pow3(L)));
    CHECK(p.lo == 0);
    CHECK(p.hi == uint32_t(pow3(L)));
  }
  // Extreme concentration exercises the zero-bin raise at the largest width.
  BinPmf tight = build_pmf(1e-6, 10);
  uint64_t total = 0;
  for (uint32_t f : *tight.freqs) {
    CHECK(f >= 1);
    total += f;
  }
  CHECK(total == kFreqTotal);
}

TEST_CASE("pmf symmetry about the center bin") {
  for (double sigma : {0.3, 1.0, 4.7}) {
    int L = plane_length(sigma);
    BinPmf p = build_pmf(sigma, L);
    int64_t off = pow3(L) / 2;
    for (int64_t j = 1; j <= off; ++j) {
      int64_t a = (*p.freqs)[size_t(off + j)];
      int64_t b = (*p.freqs)[size_t(off - j)];
      CHECK(std::llabs(a - b) <= 1);
    }
  }
}

TEST_CASE("half-mass scale puts half the real mass in the center bin") {
  const double sigma = 0.7413011092528009;
  std::vector<double> mass = real_bin_masses(sigma, 1);
  CHECK(std::fabs(mass[1] - 0.5) < 1e-9);
  CHECK(std::fabs(mass[0] - 0.22848760463080523) < 1e-9);
  CHECK(std::fabs(mass[2] - 0.22848760463080523) < 1e-9);
  // Quotas renormalize over the three-bin support, so the center bin gets
  // 0.5 / 0.95697520926161047 of the total; the remainder tie between the
  // outer bins goes to the lower index.
  BinPmf p = build_pmf(sigma, 1);
  CHECK((*p.freqs)[1] == 34241);
  CHECK((*p.freqs)[0] == 15648);
  CHECK((*p.freqs)[2] == 15647);
  CHECK_THROWS_AS(build_pmf(1.0, 0), Error);
  CHECK_THROWS_AS(build_pmf(1.0, kMaxPlaneLength + 1), Error);
}

TEST_CASE("trit masses split the support into thirds") {
  BinPmf uni = hand_pmf({7, 7, 7, 7, 7, 7, 7, 7, 7}, 2);
  TritMasses tm = trit_masses(uni);
  CHECK(tm.m[0] == 21);
  CHECK(tm.m[1] == 21);
  CHECK(tm.m[2] == 21);
  CHECK(tm.total == 63);

  BinPmf spike = hand_pmf({16384, 32768, 16384}, 1);
  TritMasses tm1 = conditional_trit_pmf(spike, 1);
  CHECK(tm1.m[0] == 16384);
  CHECK(tm1.m[1] == 32768);
  CHECK(tm1.m[2] == 16384);

  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    double sigma = 0.2 + rng.uniform() * 3.0;
    BinPmf p = build_pmf(sigma, plane_length(sigma));
    TritMasses tm2 = trit_masses(p);
    uint64_t window = 0;
    for (uint32_t k = p.lo; k < p.hi; ++k) window += (*p.freqs)[k];
    CHECK(tm2.m[0] + tm2.m[1] + tm2.m[2] == window);
  }

  CHECK_THROWS_AS(conditional_trit_pmf(spike, 2), Error);
}

TEST_CASE("interval refinement narrows to the chosen third") {
  BinPmf p = build_pmf(1.0, 2);
  CHECK(p.width() == 9);
  BinPmf mid = refine_interval(p, 1);
  CHECK(mid.lo == 3);
  CHECK(mid.hi == 6);
  BinPmf two = refine_interval(refine_interval(p, 0), 2);
  CHECK(two.lo == 2);
  CHECK(two.hi == 3);
  CHECK_THROWS_AS(refine_interval(p, 3), Error);
  CHECK_THROWS_AS(refine_interval(p, -1), Error);
}

TEST_CASE("ternary paths isolate every symbol") {
  for (int L = 1; L <= 4; ++L) {
    double sigma = double(pow3(L)) / (2.0 * kappa()) * 0.9;
    BinPmf base = build_pmf(sigma, L);
    for (int64_t s = 0; s < pow3(L); ++s) {
      std::vector<int> digits = refimpl::o_base3(s, L);
      BinPmf cur = base;
      for (int d : digits) cur = refine_interval(cur, d);
      CHECK(cur.width() == 1);
      CHECK(cur.lo == uint32_t(s));
      CHECK(conditional_mean(cur) == double(s - base.offset));
      CHECK(conditional_variance(cur) == 0.0);
    }
  }
}

TEST_CASE("bit estimate agrees with real bin masses") {
  // At the half-mass scale the center unit bin holds exactly half the
  // full-line mass, so its cost is one bit.
  const double sigma = 0.7413011092528009;
  CHECK(std::fabs(bit_estimate(0.0, sigma) - 1.0) < 1e-9);

  double total = 0.0;
  for (int k = -8; k <= 8; ++k) total += fixed_exp(-bit_estimate(double(k), 1.0) * 0.6931471805599453);
  CHECK(std::fabs(total - 1.0) < 1e-9);

  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    double sig = 0.05 + rng.uniform() * 5.0;
    double k = double(int(rng.uniform() * 9) - 4);
    CHECK(bit_estimate(k, sig) == bit_estimate(-k, sig));
  }
  CHECK(bit_estimate(1000.0, 0.01) == 64.0);
}

TEST_CASE("window moments match brute force") {
  BinPmf sym = hand_pmf({1, 2, 1}, 1);
  CHECK(conditional_mean(sym) == 0.0);
  CHECK(conditional_variance(sym) == 0.5);
  BinPmf uni = hand_pmf({1, 1, 1}, 1);
  CHECK(conditional_mean(uni) == 0.0);
  CHECK(conditional_variance(uni) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  for (double sigma : {0.4, 1.3, 6.0}) {
    int L = plane_length(sigma);
    BinPmf p = build_pmf(sigma, L);
    CHECK(std::fabs(conditional_mean(p)) <= double(pow3(L)) / double(kFreqTotal));
    auto m = refimpl::o_window_moments(*p.freqs, p.lo, p.hi);
    CHECK(std::fabs(conditional_mean(p) - double(m.mean - p.offset)) < 1e-9);
    CHECK(std::fabs(conditional_variance(p) - double(m.var)) < 1e-9);
  }
}

TEST_CASE("trit stats agree with brute force along random refinement paths") {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    double sigma = fixed_exp((rng.uniform() * 2.0 - 1.0) * 3.0);
    int L = plane_length(sigma);
    BinPmf cur = build_pmf(sigma, L);
    while (cur.width() > 1) {
      TritStats st = trit_stats(cur);
      auto m = refimpl::o_window_moments(*cur.freqs, cur.lo, cur.hi);
      CHECK(std::fabs(st.var_now - double(m.var)) < 1e-9);
      CHECK(std::fabs(st.entropy_bits - double(refimpl::o_trit_entropy(*cur.freqs, cur.lo, cur.hi))) <
            1e-9);
      double expected_child = 0.0;
      uint64_t tot = st.masses.total;
      for (int d = 0; d < 3; ++d) {
        int64_t w = (cur.hi - cur.lo) / 3;
        auto cm = refimpl::o_window_moments(*cur.freqs, cur.lo + d * w, cur.lo + (d + 1) * w);
        CHECK(std::fabs(st.var_cond[d] - double(cm.var)) < 1e-9);
        expected_child += double(st.masses.m[d]) / double(tot) * double(cm.var);
      }
      // Law of total variance: refinement cannot increase expected variance.
      CHECK(expected_child <= st.var_now + 1e-12);
      int digit = int(rng.below(3));
      cur = refine_interval(cur, digit);
    }
  }
}
