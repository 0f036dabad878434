#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "doctest.h"
#include "picm/codec.hpp"
#include "picm/error.hpp"
#include "picm/fixed_math.hpp"
#include "picm/rng.hpp"

using namespace picm;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code;
  }
  return Errc::ok;
}

ConfidenceFn toy_confidence(std::vector<double> target) {
  return [target = std::move(target)](const std::vector<double>& cur) {
    double e = 0.0;
    for (size_t i = 0; i < cur.size(); ++i) e += (cur[i] - target[i]) * (cur[i] - target[i]);
    return -e;
  };
}

std::vector<double> exact_values(const LatentGrid& grid) {
  LatentGrid q = quantize(grid);
  SideModel sm = build_side_model(q);
  std::vector<double> out(q.size());
  for (size_t i = 0; i < q.size(); ++i) out[i] = double(q.values[i]) + sm.means[i];
  return out;
}

double centered_mse(const LatentGrid& reference, const std::vector<double>& centered) {
  double e = 0.0;
  for (size_t i = 0; i < centered.size(); ++i) {
    double d = double(reference.values[i]) - centered[i];
    e += d * d;
  }
  return e / double(centered.size());
}

}  // namespace

TEST_CASE("side field quantizer round trips within half a step") {
  const float lo = -3.0f, hi = 5.0f;
  CHECK(quant_code(double(lo), lo, hi) == 0);
  CHECK(quant_code(double(hi), lo, hi) == 65535);
  CHECK(quant_code(-100.0, lo, hi) == 0);
  CHECK(quant_code(100.0, lo, hi) == 65535);
  CHECK(dequant_value(lo, hi, 0) == double(lo));
  CHECK(std::fabs(dequant_value(lo, hi, 65535) - double(hi)) < 1e-12);

  double step = (double(hi) - double(lo)) / 65535.0;
  Rng rng(3);
  uint16_t prev = 0;
  for (int t = 0; t < 2000; ++t) {
    double x = double(lo) + rng.uniform() * (double(hi) - double(lo));
    uint16_t c = quant_code(x, lo, hi);
    CHECK(std::fabs(dequant_value(lo, hi, c) - x) <= 0.5 * step * (1.0 + 1e-12));
  }
  for (int k = 0; k <= 100; ++k) {
    uint16_t c = quant_code(double(lo) + k * 0.08, lo, hi);
    CHECK(c >= prev);
    prev = c;
  }

  // Degenerate bounds collapse to the low edge.
  CHECK(quant_code(7.0, 2.0f, 2.0f) == 0);
  CHECK(dequant_value(2.0f, 2.0f, 40000) == 2.0);
}

TEST_CASE("side model materializes through f32 with a scale floor") {
  LatentGrid g = synth_grid(11, 3, 3, 4, LogUniformScale{0.05, 8.0});
  LatentGrid q = quantize(g);
  SideModel sm = build_side_model(q);

  REQUIRE(sm.sigmas.size() == q.size());
  double mu_max = 0.0;
  for (float m : q.means) mu_max = std::max(mu_max, std::fabs(double(m)));
  CHECK(sm.mean_hi == float(mu_max));
  CHECK(sm.mean_lo == -sm.mean_hi);
  CHECK(sm.log_scale_lo == float(fixed_log(double(kScaleFloor))));

  double log_step = (double(sm.log_scale_hi) - double(sm.log_scale_lo)) / 65535.0;
  for (size_t i = 0; i < q.size(); ++i) {
    CHECK(sm.sigmas[i] >= double(kScaleFloor) * (1.0 - 1e-7));
    CHECK(sm.sigmas[i] == double(float(sm.sigmas[i])));
    CHECK(sm.means[i] == double(float(sm.means[i])));
    // Dequantized scale lands within one quantizer step of the true scale.
    CHECK(std::fabs(fixed_log(sm.sigmas[i]) - fixed_log(double(q.scales[i]))) <=
          log_step + 1e-5);
  }

  LatentGrid tiny = q;
  for (float& s : tiny.scales) s = 1e-30f;
  SideModel floor_sm = build_side_model(tiny);
  for (double s : floor_sm.sigmas) CHECK(std::fabs(s - 1e-6) < 1e-12);

  LatentGrid bad = q;
  bad.scales[3] = 0.0f;
  CHECK(code_of([&] { build_side_model(bad); }) == Errc::bad_argument);
  bad.scales[3] = -1.0f;
  CHECK(code_of([&] { build_side_model(bad); }) == Errc::bad_argument);
  LatentGrid nf = q;
  nf.means[5] = std::numeric_limits<float>::quiet_NaN();
  CHECK(code_of([&] { build_side_model(nf); }) == Errc::non_finite_value);

  LatentGrid model = model_grid(q, sm);
  CHECK(model.values == q.values);
  for (size_t i = 0; i < q.size(); ++i) {
    CHECK(model.scales[i] == float(sm.sigmas[i]));
    CHECK(model.means[i] == float(sm.means[i]));
  }
  SideModel small = sm;
  small.sigmas.pop_back();
  CHECK(code_of([&] { model_grid(q, small); }) == Errc::bad_argument);
}

TEST_CASE("container serialization round trips byte for byte") {
  LatentGrid g = synth_grid(21, 3, 2, 5, LogUniformScale{0.2, 4.0});
  EncodeResult er = encode(g, Strategy::sigma, {});
  std::vector<uint8_t> bytes = serialize(er.stream);
  CHECK(bytes.size() == er.stream.total_size());
  CHECK(er.stream.fixed_prefix_size() + er.stream.payload.size() == bytes.size());

  ProgressiveBitstream back = parse(bytes);
  CHECK(back.header.height == 3);
  CHECK(back.header.width == 2);
  CHECK(back.header.channels == 5);
  CHECK(back.header.strategy == Strategy::sigma);
  CHECK(!back.header.order_embedded);
  CHECK(back.scale_codes == er.stream.scale_codes);
  CHECK(back.mean_codes == er.stream.mean_codes);
  CHECK(back.cuts == er.stream.cuts);
  CHECK(back.payload == er.stream.payload);
  CHECK(serialize(back) == bytes);

  CHECK(back.cuts.front() == 0);
  CHECK(back.cuts.back() == back.payload.size());
  CHECK(std::is_sorted(back.cuts.begin(), back.cuts.end()));
}

TEST_CASE("parsing rejects malformed containers with specific codes") {
  LatentGrid g = synth_grid(22, 2, 2, 3, ConstantScale{0.8});
  EncodeResult er = encode(g, Strategy::expected_variance, {});
  const std::vector<uint8_t> good = serialize(er.stream);
  const size_t n = 12;
  const size_t cut_count_at = 42 + 4 * n;

  auto mutate = [&](size_t at, std::vector<uint8_t> patch) {
    std::vector<uint8_t> b = good;
    for (size_t i = 0; i < patch.size(); ++i) b[at + i] = patch[i];
    return b;
  };

  CHECK(code_of([&] { parse(mutate(0, {'X'})); }) == Errc::bad_magic);
  CHECK(code_of([&] { parse(mutate(4, {9})); }) == Errc::bad_version);
  // Height dword of zero, then saturated.
  CHECK(code_of([&] { parse(mutate(5, {0, 0, 0, 0})); }) == Errc::dim_overflow);
  CHECK(code_of([&] { parse(mutate(5, {0xFF, 0xFF, 0xFF, 0xFF})); }) == Errc::dim_overflow);
  // Strategy tag: unknown id, then the order flag on a non-oracle stream.
  CHECK(code_of([&] { parse(mutate(17, {5})); }) == Errc::schema);
  CHECK(code_of([&] { parse(mutate(17, {0x80})); }) == Errc::schema);
  // Cut table: empty, nonzero start, decreasing offsets.
  CHECK(code_of([&] { parse(mutate(cut_count_at, {0, 0, 0, 0})); }) == Errc::schema);
  CHECK(code_of([&] { parse(mutate(cut_count_at + 4, {1})); }) == Errc::schema);
  CHECK(code_of([&] {
          parse(mutate(cut_count_at + 12, {0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF}));
        }) == Errc::schema);
  // Header cut short.
  CHECK(code_of([&] { parse({good.begin(), good.begin() + 20}); }) == Errc::truncated_payload);
  CHECK(code_of([&] { parse({good.begin(), good.begin() + size_t(40 + 4 * n)}); }) ==
        Errc::truncated_payload);

  // Serializer-side shape guards.
  ProgressiveBitstream bad = er.stream;
  bad.scale_codes.pop_back();
  CHECK(code_of([&] { serialize(bad); }) == Errc::bad_argument);
  bad = er.stream;
  bad.cuts.clear();
  CHECK(code_of([&] { serialize(bad); }) == Errc::bad_argument);
  bad = er.stream;
  bad.header.order_embedded = true;
  CHECK(code_of([&] { serialize(bad); }) == Errc::bad_argument);
}

TEST_CASE("embedded group orders parse and validate") {
  LatentGrid g = synth_grid(23, 2, 2, 3, ConstantScale{0.5});
  OracleSetup setup;
  setup.confidence = toy_confidence(exact_values(g));
  EncodeOptions opt;
  opt.embed_group_order = true;
  opt.oracle = &setup;
  EncodeResult er = encode(g, Strategy::oracle_channel, opt);
  REQUIRE(er.stream.header.order_embedded);
  REQUIRE(er.stream.group_order.size() == 3);

  std::vector<uint8_t> bytes = serialize(er.stream);
  ProgressiveBitstream back = parse(bytes);
  CHECK(back.group_order == er.stream.group_order);
  CHECK(serialize(back) == bytes);

  const size_t n = 12;
  size_t cut_count_at = 42 + 4 * n;
  size_t groups_at = cut_count_at + 4 + er.stream.cuts.size() * 8;
  std::vector<uint8_t> b = bytes;
  b[groups_at] = 9;  // group count mismatch
  CHECK(code_of([&] { parse(b); }) == Errc::schema);
  b = bytes;
  b[groups_at + 4] = 7;  // out-of-range group id breaks the permutation
  CHECK(code_of([&] { parse(b); }) == Errc::schema);
  b = bytes;
  b[groups_at + 4] = b[groups_at + 8];  // duplicate id
  CHECK(code_of([&] { parse(b); }) == Errc::schema);
}

TEST_CASE("every strategy decodes back to the rounded values") {
  LatentGrid g = synth_grid(42, 4, 4, 8, LogUniformScale{0.1, 10.0});
  LatentGrid q = quantize(g);
  OracleSetup setup;
  setup.confidence = toy_confidence(exact_values(g));

  for (Strategy s : {Strategy::expected_variance, Strategy::sigma, Strategy::random,
                     Strategy::oracle_channel, Strategy::oracle_patch}) {
    EncodeOptions opt;
    opt.seed = 9;
    if (is_oracle(s)) {
      opt.embed_group_order = true;
      opt.oracle = &setup;
    }
    EncodeResult er = encode(g, s, opt);
    ProgressiveBitstream bs = parse(serialize(er.stream));
    DecodeResult dr = decode(bs, DecodeBudget::full());

    CHECK(!dr.truncated);
    CHECK(dr.symbols_decoded == er.symbols_total);
    CHECK(dr.order_hash == er.order_hash);
    CHECK(dr.planes_ordered == int(er.plane_symbols.size()));
    for (size_t i = 0; i < q.size(); ++i) CHECK(dr.centered[i] == double(q.values[i]));
    CHECK(centered_mse(g, dr.centered) == er.quant_mse);

    double payload_bits = 8.0 * double(er.stream.payload.size());
    CHECK(payload_bits <= er.ideal_bits * 1.001 + 64.0);
    // The flush tail is a fixed cost, so small grids get an absolute term on
    // top of the relative band.
    CHECK(std::fabs(payload_bits - er.estimate_bits) <= 0.02 * er.estimate_bits + 72.0);
  }
}

TEST_CASE("oracle streams without an embedded order need a sidecar") {
  LatentGrid g = synth_grid(31, 3, 3, 4, LogUniformScale{0.2, 3.0});
  LatentGrid q = quantize(g);
  OracleSetup setup;
  setup.confidence = toy_confidence(exact_values(g));
  EncodeOptions opt;
  opt.oracle = &setup;
  EncodeResult er = encode(g, Strategy::oracle_patch, opt);
  CHECK(!er.stream.header.order_embedded);
  CHECK(er.stream.group_order.empty());
  CHECK(er.group_order.size() == 9);

  ProgressiveBitstream bs = parse(serialize(er.stream));
  CHECK(code_of([&] { decode(bs, DecodeBudget::full()); }) == Errc::order_unavailable);

  DecodeOptions dopt;
  dopt.group_order = er.group_order;
  DecodeResult dr = decode(bs, DecodeBudget::full(), dopt);
  CHECK(dr.order_hash == er.order_hash);
  for (size_t i = 0; i < q.size(); ++i) CHECK(dr.centered[i] == double(q.values[i]));

  DecodeOptions scrambled;
  scrambled.group_order = std::vector<uint32_t>{0, 0, 1, 2, 3, 4, 5, 6, 7};
  CHECK(code_of([&] { decode(bs, DecodeBudget::full(), scrambled); }) == Errc::bad_argument);
}

TEST_CASE("byte budgets truncate cleanly and never decode past the prefix rule") {
  LatentGrid g = synth_grid(77, 4, 4, 6, LogUniformScale{0.3, 6.0});
  EncodeResult er = encode(g, Strategy::expected_variance, {});
  ProgressiveBitstream bs = parse(serialize(er.stream));
  size_t prefix = bs.fixed_prefix_size();
  size_t total = bs.total_size();

  CHECK(code_of([&] { decode(bs, DecodeBudget::bytes(prefix - 1)); }) == Errc::bad_argument);
  CHECK(code_of([&] { decode(bs, DecodeBudget::bytes(0)); }) == Errc::bad_argument);

  DecodeResult none = decode(bs, DecodeBudget::bytes(prefix));
  CHECK(none.symbols_decoded == 0);
  CHECK(none.truncated);
  CHECK(none.payload_bytes_available == 0);
  for (uint8_t d : none.decoded) CHECK(d == 0);

  DecodeResult full = decode(bs, DecodeBudget::full());
  DecodeResult big = decode(bs, DecodeBudget::bytes(total + 1000));
  CHECK(!big.truncated);
  CHECK(big.centered == full.centered);
  CHECK(big.symbols_decoded == full.symbols_decoded);

  double prev_mse = centered_mse(g, none.centered);
  double full_mse = centered_mse(g, full.centered);
  CHECK(full_mse < prev_mse);
  CHECK(full_mse == er.quant_mse);

  // Decoded-prefix consistency: once a coefficient is complete at budget b,
  // larger budgets reproduce it bit for bit.
  std::vector<size_t> budgets;
  for (int k = 1; k <= 10; ++k) budgets.push_back(prefix + (total - prefix) * k / 10);
  DecodeResult prev = none;
  for (size_t b : budgets) {
    DecodeResult cur = decode(bs, DecodeBudget::bytes(b));
    CHECK(cur.payload_bytes_available == std::min<uint64_t>(b - prefix, bs.payload.size()));
    CHECK(cur.payload_bytes_consumed <= cur.payload_bytes_available);
    CHECK(cur.symbols_decoded >= prev.symbols_decoded);
    for (size_t i = 0; i < cur.centered.size(); ++i) {
      if (prev.decoded[i] == full.decoded[i] && prev.decoded[i] > 0)
        CHECK(cur.centered[i] == prev.centered[i]);
      CHECK(cur.decoded[i] >= prev.decoded[i]);
    }
    prev = cur;
  }
  CHECK(prev.centered == full.centered);
}

TEST_CASE("level budgets match the equivalent byte budgets") {
  LatentGrid g = synth_grid(78, 3, 4, 6, LogUniformScale{0.2, 5.0});
  EncodeOptions opt;
  opt.checkpoints_per_plane = 4;
  EncodeResult er = encode(g, Strategy::sigma, opt);
  ProgressiveBitstream bs = parse(serialize(er.stream));
  size_t prefix = bs.fixed_prefix_size();

  for (size_t level : {size_t(0), size_t(1), size_t(3), bs.cuts.size() / 2, bs.cuts.size() - 1}) {
    DecodeResult by_level = decode(bs, DecodeBudget::level(level));
    DecodeResult by_bytes = decode(bs, DecodeBudget::bytes(prefix + bs.cuts[level]));
    CHECK(by_level.centered == by_bytes.centered);
    CHECK(by_level.symbols_decoded == by_bytes.symbols_decoded);
    CHECK(by_level.decoded == by_bytes.decoded);
  }
  DecodeResult last = decode(bs, DecodeBudget::level(bs.cuts.size() - 1));
  DecodeResult full = decode(bs, DecodeBudget::full());
  CHECK(last.centered == full.centered);
  CHECK(code_of([&] { decode(bs, DecodeBudget::level(bs.cuts.size())); }) == Errc::bad_argument);
}

TEST_CASE("decoding is deterministic") {
  LatentGrid g = synth_grid(79, 3, 3, 5, LogUniformScale{0.3, 3.0});
  EncodeResult er = encode(g, Strategy::random, {.seed = 1234});
  ProgressiveBitstream bs = parse(serialize(er.stream));
  size_t mid = bs.fixed_prefix_size() + bs.payload.size() / 2;
  DecodeResult a = decode(bs, DecodeBudget::bytes(mid));
  DecodeResult b = decode(bs, DecodeBudget::bytes(mid));
  CHECK(a.centered == b.centered);
  CHECK(a.decoded == b.decoded);
  CHECK(a.order_hash == b.order_hash);
}

TEST_CASE("rate report tiles the payload by plane and level") {
  LatentGrid g = synth_grid(80, 4, 3, 8, LogUniformScale{0.1, 7.0});
  EncodeOptions opt;
  opt.checkpoints_per_plane = 3;
  EncodeResult er = encode(g, Strategy::expected_variance, opt);
  ProgressiveBitstream bs = parse(serialize(er.stream));
  RateReport rep = rate_report(bs);

  CHECK(rep.pixel_count == 256ull * 4 * 3);
  CHECK(rep.prefix_bytes == bs.fixed_prefix_size());
  CHECK(rep.payload_bytes == bs.payload.size());
  CHECK(rep.checkpoints_per_plane == 3);
  CHECK(size_t(rep.planes) * 3 + 1 == bs.cuts.size());

  CHECK(rep.plane_rows.front().start == 0);
  CHECK(rep.plane_rows.back().end == bs.payload.size());
  for (size_t i = 0; i + 1 < rep.plane_rows.size(); ++i)
    CHECK(rep.plane_rows[i].end == rep.plane_rows[i + 1].start);

  REQUIRE(rep.level_rows.size() == bs.cuts.size());
  for (size_t l = 0; l < rep.level_rows.size(); ++l) {
    CHECK(rep.level_rows[l].offset == bs.cuts[l]);
    CHECK(rep.level_rows[l].total_bits == 8 * (rep.prefix_bytes + bs.cuts[l]));
    CHECK(rep.level_rows[l].bpp ==
          double(rep.level_rows[l].total_bits) / double(rep.pixel_count));
    if (l > 0) CHECK(rep.level_rows[l].bpp >= rep.level_rows[l - 1].bpp);
  }
  CHECK(rep.level_rows.back().total_bits == 8 * bs.total_size());

  REQUIRE(rep.planes >= 2);
  ProgressiveBitstream broken = bs;
  broken.cuts.pop_back();
  CHECK(code_of([&] { rate_report(broken); }) == Errc::schema);
}

TEST_CASE("stream bounds outside the codec limits are rejected") {
  LatentGrid g = synth_grid(81, 2, 2, 2, ConstantScale{1.0});
  EncodeResult er = encode(g, Strategy::sigma, {});

  ProgressiveBitstream bad = er.stream;
  bad.header.log_scale_hi = 25.0f;  // scale near e^25 wants too many planes
  CHECK(code_of([&] { side_model_from_stream(bad); }) == Errc::schema);
  bad = er.stream;
  bad.header.log_scale_hi = std::numeric_limits<float>::quiet_NaN();
  CHECK(code_of([&] { side_model_from_stream(bad); }) == Errc::schema);
  bad = er.stream;
  bad.header.mean_lo = 1.0f;
  bad.header.mean_hi = -1.0f;
  CHECK(code_of([&] { side_model_from_stream(bad); }) == Errc::schema);
  bad = er.stream;
  bad.scale_codes.pop_back();
  CHECK(code_of([&] { side_model_from_stream(bad); }) == Errc::schema);
}

TEST_CASE("out-of-range coefficients refuse unless clamped") {
  LatentGrid g;
  g.height = 1;
  g.width = 1;
  g.channels = 4;
  g.values = {9.0f, 0.0f, -6.0f, 1.0f};
  g.means = {0.0f, 0.0f, 0.0f, 0.0f};
  g.scales = {0.01f, 0.01f, 0.01f, 0.01f};

  CHECK(code_of([&] { encode(g, Strategy::sigma, {}); }) == Errc::out_of_range_coeff);
  try {
    encode(g, Strategy::sigma, {});
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("0") != std::string::npos);
  }

  EncodeOptions opt;
  opt.clamp_out_of_range = true;
  EncodeResult er = encode(g, Strategy::sigma, opt);
  DecodeResult dr = decode(parse(serialize(er.stream)), DecodeBudget::full());
  CHECK(dr.centered[0] == 1.0);
  CHECK(dr.centered[1] == 0.0);
  CHECK(dr.centered[2] == -1.0);
  CHECK(dr.centered[3] == 1.0);
}

TEST_CASE("encode argument guards") {
  LatentGrid g = synth_grid(82, 2, 2, 2, ConstantScale{0.5});
  EncodeOptions opt;
  opt.checkpoints_per_plane = 0;
  CHECK(code_of([&] { encode(g, Strategy::sigma, opt); }) == Errc::bad_argument);
  opt.checkpoints_per_plane = 5000;
  CHECK(code_of([&] { encode(g, Strategy::sigma, opt); }) == Errc::bad_argument);

  EncodeOptions flag;
  flag.embed_group_order = true;
  CHECK(code_of([&] { encode(g, Strategy::sigma, flag); }) == Errc::bad_argument);
  CHECK(code_of([&] { encode(g, Strategy::oracle_channel, {}); }) == Errc::order_unavailable);

  LatentGrid empty;
  CHECK(code_of([&] { encode(empty, Strategy::sigma, {}); }) == Errc::dim_overflow);

  LatentGrid ragged = g;
  ragged.values.pop_back();
  CHECK(code_of([&] { encode(ragged, Strategy::sigma, {}); }) == Errc::bad_argument);
}

TEST_CASE("single coefficient grids survive the round trip") {
  LatentGrid g;
  g.height = g.width = g.channels = 1;
  g.values = {1.4f};
  g.means = {0.25f};
  g.scales = {0.9f};
  EncodeResult er = encode(g, Strategy::expected_variance, {});
  DecodeResult dr = decode(parse(serialize(er.stream)), DecodeBudget::full());
  CHECK(dr.centered[0] == 1.0);
  CHECK(std::fabs(double(dr.grid.means[0]) - 0.25) < 1e-4);
  CHECK(dr.grid.values[0] == float(dr.centered[0] + double(dr.grid.means[0])));
}
