#include "picm/prioritizer.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "picm/error.hpp"
#include "picm/rng.hpp"

namespace picm {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::expected_variance: return "expvar";
    case Strategy::sigma: return "sigma";
    case Strategy::random: return "random";
    case Strategy::oracle_channel: return "oracle-channel";
    case Strategy::oracle_patch: return "oracle-patch";
  }
  return "?";
}

std::optional<Strategy> strategy_from_name(const std::string& name) {
  for (Strategy s : {Strategy::expected_variance, Strategy::sigma, Strategy::random,
                     Strategy::oracle_channel, Strategy::oracle_patch})
    if (name == strategy_name(s)) return s;
  return std::nullopt;
}

double score_expected_variance(const TritStats& st) {
  if (st.entropy_bits == 0.0) return std::numeric_limits<double>::infinity();
  double expected = 0.0;
  for (int d = 0; d < 3; ++d) {
    double p = static_cast<double>(st.masses.m[d]) / static_cast<double>(st.masses.total);
    expected += p * st.var_cond[d];
  }
  double drop = st.var_now - expected;
  return drop / st.entropy_bits;
}

double score_sigma(double sigma, const TritStats& st) {
  if (st.entropy_bits == 0.0) return std::numeric_limits<double>::infinity();
  return sigma / st.entropy_bits;
}

double score_random(uint64_t seed, int plane, uint32_t slot) {
  uint64_t h = splitmix64(seed ^ splitmix64(static_cast<uint64_t>(plane) << 32 | slot));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

PlaneOrder order_plane(const std::vector<uint32_t>& slots, const std::vector<double>& scores,
                       const std::vector<char>& skip) {
  if (slots.size() != scores.size() || slots.size() != skip.size())
    fail(Errc::bad_argument, "slot/score/skip sizes disagree");
  std::vector<uint32_t> keep;
  keep.reserve(slots.size());
  for (size_t i = 0; i < slots.size(); ++i)
    if (!skip[i]) keep.push_back(static_cast<uint32_t>(i));
  std::sort(keep.begin(), keep.end(), [&](uint32_t a, uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return slots[a] < slots[b];
  });
  PlaneOrder out;
  out.slots.reserve(keep.size());
  out.scores.reserve(keep.size());
  for (uint32_t i : keep) {
    out.slots.push_back(slots[i]);
    out.scores.push_back(scores[i]);
  }
  return out;
}

uint32_t group_of(Grouping grouping, size_t flat, uint32_t channels) {
  if (grouping == Grouping::channel) return static_cast<uint32_t>(flat % channels);
  return static_cast<uint32_t>(flat / channels);  // h * width + w
}

uint32_t group_count(Grouping grouping, uint32_t height, uint32_t width, uint32_t channels) {
  return grouping == Grouping::channel ? channels : height * width;
}

std::vector<uint32_t> oracle_group_order(uint32_t height, uint32_t width, uint32_t channels,
                                         Grouping grouping, const std::vector<double>& base,
                                         const std::vector<double>& exact,
                                         const ConfidenceFn& confidence) {
  if (!confidence) fail(Errc::bad_argument, "oracle strategies need a confidence function");
  size_t s = static_cast<size_t>(height) * width * channels;
  if (base.size() != s || exact.size() != s)
    fail(Errc::bad_argument, "reconstruction sizes disagree with dimensions");
  uint32_t g = group_count(grouping, height, width, channels);

  std::vector<std::vector<uint32_t>> members(g);
  for (size_t i = 0; i < s; ++i)
    members[group_of(grouping, i, channels)].push_back(static_cast<uint32_t>(i));

  std::vector<double> current = base;
  std::vector<char> taken(g, 0);
  std::vector<uint32_t> order;
  order.reserve(g);
  for (uint32_t step = 0; step < g; ++step) {
    double best = -std::numeric_limits<double>::infinity();
    uint32_t best_g = 0;
    for (uint32_t cand = 0; cand < g; ++cand) {
      if (taken[cand]) continue;
      for (uint32_t i : members[cand]) current[i] = exact[i];
      double c = confidence(current);
      for (uint32_t i : members[cand]) current[i] = base[i];
      if (c > best) {
        best = c;
        best_g = cand;
      }
    }
    taken[best_g] = 1;
    for (uint32_t i : members[best_g]) current[i] = exact[i];
    order.push_back(best_g);
  }
  return order;
}

void plane_scores(Strategy strategy, const std::vector<uint32_t>& slots,
                  const std::vector<TritStats>& stats, const std::vector<double>& sigmas,
                  uint64_t seed, int plane, const std::vector<uint32_t>* slot_group_rank,
                  std::vector<double>& scores, std::vector<char>& skip) {
  size_t n = slots.size();
  if (stats.size() != n) fail(Errc::bad_argument, "stats not aligned with slots");
  scores.assign(n, 0.0);
  skip.assign(n, 0);
  for (size_t i = 0; i < n; ++i) {
    if (stats[i].entropy_bits == 0.0) {
      skip[i] = 1;  // free slot: zero bits, zero information
      continue;
    }
    switch (strategy) {
      case Strategy::expected_variance:
        scores[i] = score_expected_variance(stats[i]);
        break;
      case Strategy::sigma:
        scores[i] = score_sigma(sigmas[slots[i]], stats[i]);
        break;
      case Strategy::random:
        scores[i] = score_random(seed, plane, slots[i]);
        break;
      case Strategy::oracle_channel:
      case Strategy::oracle_patch:
        if (!slot_group_rank) fail(Errc::order_unavailable, "oracle order not available");
        scores[i] = -static_cast<double>((*slot_group_rank)[slots[i]]);
        break;
    }
  }
}

PriorityOrder build_order(Strategy strategy, const LatentGrid& quantized,
                          const TritPlaneStack& stack, uint64_t seed,
                          const OracleSetup* oracle) {
  PriorityOrder po;
  po.strategy = strategy;
  po.seed = seed;
  po.accessible = decoder_accessible(strategy);

  size_t s = stack.count;
  std::vector<double> sigmas(s);
  for (size_t i = 0; i < s; ++i) sigmas[i] = quantized.scales[i];

  std::vector<uint32_t> slot_rank;
  if (is_oracle(strategy)) {
    if (!oracle) fail(Errc::order_unavailable, "oracle strategies need an oracle setup");
    Grouping grouping =
        strategy == Strategy::oracle_channel ? Grouping::channel : Grouping::patch;
    std::vector<uint8_t> none(s, 0);
    std::vector<double> base = recompose(stack, none, quantized.scales);
    std::vector<double> exact(s);
    for (size_t i = 0; i < s; ++i)
      exact[i] = static_cast<double>(quantized.values[i]) + quantized.means[i];
    for (size_t i = 0; i < s; ++i) base[i] += quantized.means[i];
    po.group_order = oracle_group_order(quantized.height, quantized.width, quantized.channels,
                                        grouping, base, exact, oracle->confidence);
    slot_rank.resize(s);
    std::vector<uint32_t> rank_of_group(po.group_order.size());
    for (uint32_t r = 0; r < po.group_order.size(); ++r) rank_of_group[po.group_order[r]] = r;
    for (size_t i = 0; i < s; ++i)
      slot_rank[i] =
          rank_of_group[group_of(grouping, i, quantized.channels)];
  }

  std::unordered_map<uint64_t, BinPmf> cache;
  std::vector<BinPmf> states(s);
  for (size_t i = 0; i < s; ++i) {
    int len = stack.lengths[i];
    uint64_t key = std::bit_cast<uint64_t>(sigmas[i]) ^ (static_cast<uint64_t>(len) << 1);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, build_pmf(sigmas[i], len)).first;
    states[i] = it->second;
  }

  OrderHash hash;
  po.planes.resize(stack.max_length);
  std::vector<TritStats> stats;
  std::vector<double> scores;
  std::vector<char> skip;
  for (int g = 0; g < stack.max_length; ++g) {
    std::vector<uint32_t> slots = plane_slots(stack, g);
    stats.resize(slots.size());
    for (size_t i = 0; i < slots.size(); ++i) stats[i] = trit_stats(states[slots[i]]);
    plane_scores(strategy, slots, stats, sigmas, seed, g,
                 slot_rank.empty() ? nullptr : &slot_rank, scores, skip);
    po.planes[g] = order_plane(slots, scores, skip);
    hash.mix_plane(g, po.planes[g].slots);
    for (uint32_t c : slots) states[c] = refine_interval(states[c], stack.digit(c, g));
  }
  po.hash = hash.h;
  return po;
}

}  // namespace picm
