#include "picm/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <unordered_map>

#include "picm/bytes.hpp"
#include "picm/error.hpp"
#include "picm/fixed_math.hpp"
#include "picm/range_coder.hpp"
#include "picm/trit_plane.hpp"

namespace picm {
namespace {

constexpr char kMagic[4] = {'P', 'I', 'C', 'M'};
constexpr uint8_t kVersion = 1;
constexpr uint8_t kOrderFlag = 0x80;
constexpr size_t kMaxElems = size_t(1) << 28;
constexpr int kMaxCheckpoints = 4096;

size_t checked_size(uint32_t h, uint32_t w, uint32_t c) {
  if (h == 0 || w == 0 || c == 0) fail(Errc::dim_overflow, "grid dimensions must be positive");
  size_t s = size_t(h) * w;
  if (c != 0 && s > kMaxElems / c) fail(Errc::dim_overflow, "grid dimensions overflow");
  s *= c;
  if (s > kMaxElems) fail(Errc::dim_overflow, "grid dimensions overflow");
  return s;
}

void check_grid_shape(const LatentGrid& g) {
  size_t s = checked_size(g.height, g.width, g.channels);
  if (g.values.size() != s || g.means.size() != s || g.scales.size() != s)
    fail(Errc::bad_argument, "field sizes disagree with grid dimensions");
}

// Side scales and means are materialized through f32 so both coder sides and
// the in-memory grids carry bit-identical model values.
void finish_side(SideModel& sm) {
  size_t n = sm.scale_codes.size();
  sm.sigmas.resize(n);
  sm.means.resize(n);
  double floor = double(kScaleFloor);
  for (size_t i = 0; i < n; ++i) {
    double s = fixed_exp(dequant_value(sm.log_scale_lo, sm.log_scale_hi, sm.scale_codes[i]));
    if (s < floor) s = floor;
    sm.sigmas[i] = double(float(s));
    sm.means[i] = double(float(dequant_value(sm.mean_lo, sm.mean_hi, sm.mean_codes[i])));
  }
}

void check_bounds(const SideModel& sm) {
  if (!std::isfinite(sm.log_scale_lo) || !std::isfinite(sm.log_scale_hi) ||
      !std::isfinite(sm.mean_lo) || !std::isfinite(sm.mean_hi))
    fail(Errc::schema, "non-finite quantizer bounds");
  if (sm.log_scale_hi < sm.log_scale_lo || sm.mean_hi < sm.mean_lo)
    fail(Errc::schema, "inverted quantizer bounds");
  double top = fixed_exp(double(sm.log_scale_hi));
  if (top < double(kScaleFloor)) top = double(kScaleFloor);
  if (plane_length(double(float(top))) > kMaxPlaneLength)
    fail(Errc::schema, "declared scale range exceeds the codec limit");
}

Grouping strategy_grouping(Strategy s) {
  return s == Strategy::oracle_channel ? Grouping::channel : Grouping::patch;
}

// Ranks per coefficient from a group pick order (group ids, best first).
std::vector<uint32_t> slot_ranks_from_order(const std::vector<uint32_t>& order, Grouping grouping,
                                            uint32_t height, uint32_t width, uint32_t channels) {
  uint32_t groups = group_count(grouping, height, width, channels);
  if (order.size() != groups)
    fail(Errc::bad_argument, "group order has " + std::to_string(order.size()) + " entries, want " +
                                 std::to_string(groups));
  std::vector<uint32_t> rank(groups, groups);
  for (uint32_t r = 0; r < groups; ++r) {
    uint32_t gid = order[r];
    if (gid >= groups || rank[gid] != groups)
      fail(Errc::bad_argument, "group order is not a permutation of the groups");
    rank[gid] = r;
  }
  size_t n = size_t(height) * width * channels;
  std::vector<uint32_t> slot_rank(n);
  for (size_t i = 0; i < n; ++i) slot_rank[i] = rank[group_of(grouping, i, channels)];
  return slot_rank;
}

// Initial per-coefficient PMFs, shared across equal scale codes.
std::vector<BinPmf> initial_states(const SideModel& sm, const std::vector<uint8_t>& lengths) {
  std::unordered_map<uint16_t, BinPmf> cache;
  std::vector<BinPmf> states(lengths.size());
  for (size_t i = 0; i < lengths.size(); ++i) {
    auto it = cache.find(sm.scale_codes[i]);
    if (it == cache.end())
      it = cache.emplace(sm.scale_codes[i], build_pmf(sm.sigmas[i], lengths[i])).first;
    states[i] = it->second;
  }
  return states;
}

std::vector<uint8_t> model_lengths(const SideModel& sm, int& max_length) {
  std::vector<uint8_t> lengths(sm.sigmas.size());
  max_length = 0;
  for (size_t i = 0; i < sm.sigmas.size(); ++i) {
    int len = plane_length(sm.sigmas[i]);
    if (len > kMaxPlaneLength)
      fail(Errc::schema, "scale code implies an unsupported plane length");
    lengths[i] = uint8_t(len);
    max_length = std::max(max_length, len);
  }
  return lengths;
}

}  // namespace

uint16_t quant_code(double x, float lo, float hi) {
  double l = lo, h = hi;
  if (!(h > l)) return 0;
  double t = round_half_away((x - l) * 65535.0 / (h - l));
  if (t < 0.0) t = 0.0;
  if (t > 65535.0) t = 65535.0;
  return uint16_t(t);
}

double dequant_value(float lo, float hi, uint16_t code) {
  double l = lo, h = hi;
  return l + double(code) * (h - l) / 65535.0;
}

SideModel build_side_model(const LatentGrid& grid) {
  check_grid_shape(grid);
  size_t n = grid.size();
  SideModel sm;
  double log_floor = fixed_log(double(kScaleFloor));
  std::vector<double> logs(n);
  double log_hi = log_floor;
  double mu_max = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double s = double(grid.scales[i]);
    if (!std::isfinite(s) || !(s > 0.0))
      fail(Errc::bad_argument, "scales[" + std::to_string(i) + "] must be positive and finite");
    if (s < double(kScaleFloor)) s = double(kScaleFloor);
    logs[i] = fixed_log(s);
    log_hi = std::max(log_hi, logs[i]);
    double m = double(grid.means[i]);
    if (!std::isfinite(m))
      fail(Errc::non_finite_value, "means[" + std::to_string(i) + "] is not finite");
    mu_max = std::max(mu_max, std::fabs(m));
  }
  sm.log_scale_lo = float(log_floor);
  sm.log_scale_hi = float(log_hi);
  sm.mean_hi = float(mu_max);
  sm.mean_lo = -sm.mean_hi;
  sm.scale_codes.resize(n);
  sm.mean_codes.resize(n);
  for (size_t i = 0; i < n; ++i) {
    sm.scale_codes[i] = quant_code(logs[i], sm.log_scale_lo, sm.log_scale_hi);
    sm.mean_codes[i] = quant_code(double(grid.means[i]), sm.mean_lo, sm.mean_hi);
  }
  finish_side(sm);
  return sm;
}

SideModel side_model_from_stream(const ProgressiveBitstream& bs) {
  size_t n = checked_size(bs.header.height, bs.header.width, bs.header.channels);
  if (bs.scale_codes.size() != n || bs.mean_codes.size() != n)
    fail(Errc::schema, "side field sizes disagree with the header dimensions");
  SideModel sm;
  sm.log_scale_lo = bs.header.log_scale_lo;
  sm.log_scale_hi = bs.header.log_scale_hi;
  sm.mean_lo = bs.header.mean_lo;
  sm.mean_hi = bs.header.mean_hi;
  sm.scale_codes = bs.scale_codes;
  sm.mean_codes = bs.mean_codes;
  check_bounds(sm);
  finish_side(sm);
  return sm;
}

LatentGrid model_grid(const LatentGrid& quantized, const SideModel& side) {
  check_grid_shape(quantized);
  if (side.sigmas.size() != quantized.size())
    fail(Errc::bad_argument, "side model size disagrees with the grid");
  LatentGrid g = quantized;
  for (size_t i = 0; i < g.size(); ++i) {
    g.means[i] = float(side.means[i]);
    g.scales[i] = float(side.sigmas[i]);
  }
  return g;
}

size_t ProgressiveBitstream::fixed_prefix_size() const {
  size_t s = 4 + 1 + 12 + 1 + 8 + 16;
  s += scale_codes.size() * 2 + mean_codes.size() * 2;
  s += 4 + cuts.size() * 8;
  if (header.order_embedded) s += 4 + group_order.size() * 4;
  return s;
}

std::vector<uint8_t> serialize(const ProgressiveBitstream& bs) {
  size_t n = checked_size(bs.header.height, bs.header.width, bs.header.channels);
  if (bs.scale_codes.size() != n || bs.mean_codes.size() != n)
    fail(Errc::bad_argument, "side field sizes disagree with the header dimensions");
  if (bs.cuts.empty()) fail(Errc::bad_argument, "cut table must not be empty");
  if (bs.header.order_embedded && bs.group_order.empty())
    fail(Errc::bad_argument, "order flag set but no group order present");
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u8(kVersion);
  w.u32(bs.header.height);
  w.u32(bs.header.width);
  w.u32(bs.header.channels);
  uint8_t tag = uint8_t(bs.header.strategy);
  if (bs.header.order_embedded) tag |= kOrderFlag;
  w.u8(tag);
  w.u64(bs.header.seed);
  w.f32(bs.header.log_scale_lo);
  w.f32(bs.header.log_scale_hi);
  w.f32(bs.header.mean_lo);
  w.f32(bs.header.mean_hi);
  for (uint16_t c : bs.scale_codes) w.u16(c);
  for (uint16_t c : bs.mean_codes) w.u16(c);
  w.u32(uint32_t(bs.cuts.size()));
  for (uint64_t o : bs.cuts) w.u64(o);
  if (bs.header.order_embedded) {
    w.u32(uint32_t(bs.group_order.size()));
    for (uint32_t g : bs.group_order) w.u32(g);
  }
  w.raw(bs.payload.data(), bs.payload.size());
  return std::move(w.bytes);
}

ProgressiveBitstream parse(const std::vector<uint8_t>& bytes) {
  ByteReader r(bytes.data(), bytes.size());
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) fail(Errc::bad_magic, "bad magic");
  uint8_t version = r.u8();
  if (version != kVersion)
    fail(Errc::bad_version, "unsupported stream version " + std::to_string(version));
  ProgressiveBitstream bs;
  bs.header.height = r.u32();
  bs.header.width = r.u32();
  bs.header.channels = r.u32();
  size_t n = checked_size(bs.header.height, bs.header.width, bs.header.channels);
  uint8_t tag = r.u8();
  uint8_t raw_strategy = tag & ~kOrderFlag;
  if (raw_strategy > uint8_t(Strategy::oracle_patch))
    fail(Errc::schema, "unknown strategy tag " + std::to_string(raw_strategy));
  bs.header.strategy = Strategy(raw_strategy);
  bs.header.order_embedded = (tag & kOrderFlag) != 0;
  if (bs.header.order_embedded && !is_oracle(bs.header.strategy))
    fail(Errc::schema, "group order flag on a non-oracle stream");
  bs.header.seed = r.u64();
  bs.header.log_scale_lo = r.f32();
  bs.header.log_scale_hi = r.f32();
  bs.header.mean_lo = r.f32();
  bs.header.mean_hi = r.f32();
  bs.scale_codes.resize(n);
  for (size_t i = 0; i < n; ++i) bs.scale_codes[i] = r.u16();
  bs.mean_codes.resize(n);
  for (size_t i = 0; i < n; ++i) bs.mean_codes[i] = r.u16();
  uint32_t cut_count = r.u32();
  if (cut_count < 1 || cut_count > 1u + uint32_t(kMaxPlaneLength) * kMaxCheckpoints)
    fail(Errc::schema, "cut table size " + std::to_string(cut_count) + " out of range");
  bs.cuts.resize(cut_count);
  for (uint32_t i = 0; i < cut_count; ++i) bs.cuts[i] = r.u64();
  if (bs.cuts[0] != 0) fail(Errc::schema, "cut table must start at zero");
  for (uint32_t i = 1; i < cut_count; ++i)
    if (bs.cuts[i] < bs.cuts[i - 1]) fail(Errc::schema, "cut table offsets decrease");
  if (bs.header.order_embedded) {
    uint32_t groups = r.u32();
    Grouping grouping = strategy_grouping(bs.header.strategy);
    uint32_t want = group_count(grouping, bs.header.height, bs.header.width, bs.header.channels);
    if (groups != want)
      fail(Errc::schema, "group order has " + std::to_string(groups) + " entries, want " +
                             std::to_string(want));
    bs.group_order.resize(groups);
    for (uint32_t i = 0; i < groups; ++i) bs.group_order[i] = r.u32();
    std::vector<char> seen(groups, 0);
    for (uint32_t g : bs.group_order) {
      if (g >= groups || seen[g]) fail(Errc::schema, "group order is not a permutation");
      seen[g] = 1;
    }
  }
  bs.payload.assign(bytes.begin() + r.pos(), bytes.end());
  return bs;
}

EncodeResult encode(const LatentGrid& grid, Strategy strategy, const EncodeOptions& opt) {
  check_grid_shape(grid);
  if (opt.checkpoints_per_plane < 1 || opt.checkpoints_per_plane > kMaxCheckpoints)
    fail(Errc::bad_argument, "checkpoints per plane must be in [1, " +
                                 std::to_string(kMaxCheckpoints) + "]");
  if (opt.embed_group_order && !is_oracle(strategy))
    fail(Errc::bad_argument, "only oracle strategies carry a group order");
  if (is_oracle(strategy) && (opt.oracle == nullptr || !opt.oracle->confidence))
    fail(Errc::order_unavailable, "oracle strategy needs a confidence oracle");

  LatentGrid q = quantize(grid);
  size_t n = q.size();
  double qmse = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = double(grid.values[i]) - double(q.values[i]);
    qmse += d * d;
  }
  qmse /= double(n);

  SideModel sm = build_side_model(q);
  LatentGrid model = model_grid(q, sm);
  TritPlaneStack stack = decompose(model, opt.clamp_out_of_range);
  const int planes = stack.max_length;
  const int K = opt.checkpoints_per_plane;

  std::vector<BinPmf> states = initial_states(sm, stack.lengths);

  EncodeResult res;
  res.quant_mse = qmse;
  for (size_t i = 0; i < n; ++i)
    res.estimate_bits += bit_estimate(double(model.values[i]), sm.sigmas[i]);

  std::vector<uint32_t> slot_rank_vec;
  const std::vector<uint32_t>* slot_rank = nullptr;
  if (is_oracle(strategy)) {
    Grouping grouping = strategy_grouping(strategy);
    std::vector<double> base(n), exact(n);
    for (size_t i = 0; i < n; ++i) {
      base[i] = conditional_mean(states[i]) + sm.means[i];
      exact[i] = double(model.values[i]) + sm.means[i];
    }
    res.group_order = oracle_group_order(q.height, q.width, q.channels, grouping, base, exact,
                                         opt.oracle->confidence);
    slot_rank_vec = slot_ranks_from_order(res.group_order, grouping, q.height, q.width, q.channels);
    slot_rank = &slot_rank_vec;
  }

  RangeEncoder enc;
  OrderHash hash;
  std::vector<uint64_t> cuts{0};
  res.plane_symbols.assign(planes, 0);
  for (int g = 0; g < planes; ++g) {
    std::vector<uint32_t> slots = plane_slots(stack.lengths, planes, g);
    std::vector<TritStats> stats(slots.size());
    for (size_t i = 0; i < slots.size(); ++i) stats[i] = trit_stats(states[slots[i]]);
    std::vector<double> scores;
    std::vector<char> skip;
    plane_scores(strategy, slots, stats, sm.sigmas, opt.seed, g, slot_rank, scores, skip);
    PlaneOrder po = order_plane(slots, scores, skip);
    hash.mix_plane(g, po.slots);
    uint64_t coded = po.slots.size();
    res.plane_symbols[g] = coded;
    res.symbols_total += coded;
    uint64_t next_k = 1;
    for (uint64_t s = 0; s < coded; ++s) {
      uint32_t c = po.slots[s];
      TritMasses tm = trit_masses(states[c]);
      int d = stack.digit(c, g);
      enc.encode_trit(d, tm);
      res.ideal_bits += -fixed_log2(double(tm.m[d]) / double(tm.total));
      states[c] = refine_interval(states[c], d);
      while (next_k <= uint64_t(K) && s + 1 == (coded * next_k + K - 1) / uint64_t(K)) {
        cuts.push_back(enc.bytes_emitted());
        ++next_k;
      }
    }
    while (next_k <= uint64_t(K)) {
      cuts.push_back(enc.bytes_emitted());
      ++next_k;
    }
  }
  std::vector<uint8_t> payload = enc.finish();
  cuts.back() = payload.size();

  res.order_hash = hash.h;
  res.stream.header.height = q.height;
  res.stream.header.width = q.width;
  res.stream.header.channels = q.channels;
  res.stream.header.strategy = strategy;
  res.stream.header.order_embedded = opt.embed_group_order;
  res.stream.header.seed = opt.seed;
  res.stream.header.log_scale_lo = sm.log_scale_lo;
  res.stream.header.log_scale_hi = sm.log_scale_hi;
  res.stream.header.mean_lo = sm.mean_lo;
  res.stream.header.mean_hi = sm.mean_hi;
  res.stream.scale_codes = std::move(sm.scale_codes);
  res.stream.mean_codes = std::move(sm.mean_codes);
  res.stream.cuts = std::move(cuts);
  if (opt.embed_group_order) res.stream.group_order = res.group_order;
  res.stream.payload = std::move(payload);
  return res;
}

DecodeResult decode(const ProgressiveBitstream& bs, const DecodeBudget& budget,
                    const DecodeOptions& opt) {
  const StreamHeader& h = bs.header;
  SideModel sm = side_model_from_stream(bs);
  size_t n = sm.sigmas.size();
  int planes = 0;
  std::vector<uint8_t> lengths = model_lengths(sm, planes);

  size_t prefix = bs.fixed_prefix_size();
  uint64_t avail = 0;
  switch (budget.kind) {
    case DecodeBudget::Kind::full:
      avail = bs.payload.size();
      break;
    case DecodeBudget::Kind::bytes:
      if (budget.value < prefix)
        fail(Errc::bad_argument, "budget " + std::to_string(budget.value) +
                                     " below the fixed prefix of " + std::to_string(prefix) +
                                     " bytes");
      avail = std::min<uint64_t>(budget.value - prefix, bs.payload.size());
      break;
    case DecodeBudget::Kind::level:
      if (budget.value >= bs.cuts.size())
        fail(Errc::bad_argument, "level " + std::to_string(budget.value) +
                                     " beyond the cut table of " + std::to_string(bs.cuts.size()) +
                                     " entries");
      avail = std::min<uint64_t>(bs.cuts[budget.value], bs.payload.size());
      break;
  }

  std::vector<uint32_t> slot_rank_vec;
  const std::vector<uint32_t>* slot_rank = nullptr;
  if (is_oracle(h.strategy)) {
    const std::vector<uint32_t>* order = nullptr;
    if (h.order_embedded)
      order = &bs.group_order;
    else if (opt.group_order)
      order = &*opt.group_order;
    else
      fail(Errc::order_unavailable, "stream carries no group order; supply one to decode");
    slot_rank_vec =
        slot_ranks_from_order(*order, strategy_grouping(h.strategy), h.height, h.width, h.channels);
    slot_rank = &slot_rank_vec;
  }

  std::vector<BinPmf> states = initial_states(sm, lengths);
  RangeDecoder dec(bs.payload.data(), size_t(avail));

  DecodeResult res;
  res.payload_bytes_available = avail;
  res.decoded.assign(n, 0);
  res.plane_symbols.assign(planes, 0);
  res.plane_slot_totals.assign(planes, 0);
  for (int g = 0; g < planes; ++g)
    res.plane_slot_totals[g] = plane_slots(lengths, planes, g).size();

  OrderHash hash;
  bool stopped = false;
  for (int g = 0; g < planes && !stopped; ++g) {
    std::vector<uint32_t> slots = plane_slots(lengths, planes, g);
    std::vector<TritStats> stats(slots.size());
    for (size_t i = 0; i < slots.size(); ++i) stats[i] = trit_stats(states[slots[i]]);
    std::vector<double> scores;
    std::vector<char> skip;
    plane_scores(h.strategy, slots, stats, sm.sigmas, h.seed, g, slot_rank, scores, skip);
    PlaneOrder po = order_plane(slots, scores, skip);
    hash.mix_plane(g, po.slots);
    res.planes_ordered = g + 1;
    for (uint32_t c : po.slots) {
      TritMasses tm = trit_masses(states[c]);
      int d = dec.decode_trit(tm);
      if (d == RangeDecoder::kTruncated) {
        stopped = true;
        break;
      }
      states[c] = refine_interval(states[c], d);
      res.decoded[c] += 1;
      res.plane_symbols[g] += 1;
      res.symbols_decoded += 1;
    }
  }
  res.truncated = stopped;
  res.payload_bytes_consumed = dec.bytes_consumed();
  res.order_hash = hash.h;

  res.centered.resize(n);
  res.grid.height = h.height;
  res.grid.width = h.width;
  res.grid.channels = h.channels;
  res.grid.values.resize(n);
  res.grid.means.resize(n);
  res.grid.scales.resize(n);
  for (size_t i = 0; i < n; ++i) {
    res.centered[i] = conditional_mean(states[i]);
    res.grid.values[i] = float(res.centered[i] + sm.means[i]);
    res.grid.means[i] = float(sm.means[i]);
    res.grid.scales[i] = float(sm.sigmas[i]);
  }
  return res;
}

RateReport rate_report(const ProgressiveBitstream& bs) {
  SideModel sm = side_model_from_stream(bs);
  int planes = 0;
  model_lengths(sm, planes);
  RateReport rep;
  if (bs.cuts.empty() || (bs.cuts.size() - 1) % size_t(planes) != 0)
    fail(Errc::schema, "cut table does not divide into " + std::to_string(planes) + " planes");
  int K = int((bs.cuts.size() - 1) / size_t(planes));
  if (K < 1) fail(Errc::schema, "cut table too small");
  rep.planes = planes;
  rep.checkpoints_per_plane = K;
  rep.pixel_count = 256ull * bs.header.height * bs.header.width;
  rep.prefix_bytes = bs.fixed_prefix_size();
  rep.payload_bytes = bs.cuts.back();
  rep.plane_rows.resize(planes);
  for (int g = 0; g < planes; ++g) {
    rep.plane_rows[g].plane = g;
    rep.plane_rows[g].start = bs.cuts[size_t(g) * K];
    rep.plane_rows[g].end = bs.cuts[size_t(g + 1) * K];
  }
  rep.level_rows.resize(bs.cuts.size());
  for (size_t l = 0; l < bs.cuts.size(); ++l) {
    rep.level_rows[l].level = int(l);
    rep.level_rows[l].offset = bs.cuts[l];
    rep.level_rows[l].total_bits = 8 * (rep.prefix_bytes + bs.cuts[l]);
    rep.level_rows[l].bpp = double(rep.level_rows[l].total_bits) / double(rep.pixel_count);
  }
  return rep;
}

}  // namespace picm
