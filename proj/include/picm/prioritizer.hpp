#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "picm/gaussian.hpp"
#include "picm/tensor.hpp"
#include "picm/trit_plane.hpp"

namespace picm {

enum class Strategy : uint8_t {
  expected_variance = 0,
  sigma = 1,
  random = 2,
  oracle_channel = 3,
  oracle_patch = 4,
};

const char* strategy_name(Strategy s);
std::optional<Strategy> strategy_from_name(const std::string& name);
inline bool is_oracle(Strategy s) {
  return s == Strategy::oracle_channel || s == Strategy::oracle_patch;
}
// Whether the decoder can rebuild the order from decoded information alone.
inline bool decoder_accessible(Strategy s) { return !is_oracle(s); }

// Expected distortion drop per coded bit for one more trit:
// (var_now - sum_d p_d var_d) / H. Returns +inf when H == 0 (the caller
// skips such slots: they cost nothing and carry nothing).
double score_expected_variance(const TritStats& st);
// Scale-to-entropy ratio.
double score_sigma(double sigma, const TritStats& st);
// Keyed hash, uniform per (seed, plane, slot); 53-bit resolution.
double score_random(uint64_t seed, int plane, uint32_t slot);

struct PlaneOrder {
  std::vector<uint32_t> slots;
  std::vector<double> scores;
};

// Descending score, ties by ascending flat index; skip-marked slots dropped.
PlaneOrder order_plane(const std::vector<uint32_t>& slots, const std::vector<double>& scores,
                       const std::vector<char>& skip);

// FNV-1a over the realized per-plane permutations.
struct OrderHash {
  uint64_t h = 1469598103934665603ull;
  void mix(uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 1099511628211ull;
    }
  }
  void mix_plane(int plane, const std::vector<uint32_t>& order) {
    mix(static_cast<uint32_t>(plane));
    mix(static_cast<uint32_t>(order.size()));
    for (uint32_t s : order) mix(s);
  }
};

// Confidence of a downstream consumer given a full reconstruction.
using ConfidenceFn = std::function<double(const std::vector<double>&)>;

enum class Grouping { channel, patch };

// Greedy ranking of coefficient groups by marginal confidence gain: start
// from `base`, repeatedly reveal the group whose exact values raise the
// confidence most. Returns the pick order (group ids, best first).
std::vector<uint32_t> oracle_group_order(uint32_t height, uint32_t width, uint32_t channels,
                                         Grouping grouping, const std::vector<double>& base,
                                         const std::vector<double>& exact,
                                         const ConfidenceFn& confidence);

// Group id of a flat index under a grouping.
uint32_t group_of(Grouping grouping, size_t flat, uint32_t channels);
uint32_t group_count(Grouping grouping, uint32_t height, uint32_t width, uint32_t channels);

// Per-slot scores for one plane. stats is aligned with slots; sigmas and
// slot_group_rank are indexed by coefficient. skip gets set for zero-entropy
// slots.
void plane_scores(Strategy strategy, const std::vector<uint32_t>& slots,
                  const std::vector<TritStats>& stats, const std::vector<double>& sigmas,
                  uint64_t seed, int plane, const std::vector<uint32_t>* slot_group_rank,
                  std::vector<double>& scores, std::vector<char>& skip);

struct PriorityOrder {
  Strategy strategy = Strategy::expected_variance;
  uint64_t seed = 0;
  bool accessible = true;
  std::vector<PlaneOrder> planes;
  std::vector<uint32_t> group_order;  // oracle strategies only
  uint64_t hash = 0;
};

struct OracleSetup {
  ConfidenceFn confidence;
};

// Full transmission order for a grid whose digits are known (encoder side).
// Oracle strategies need an OracleSetup; scales in `grid` are used as-is.
PriorityOrder build_order(Strategy strategy, const LatentGrid& quantized,
                          const TritPlaneStack& stack, uint64_t seed,
                          const OracleSetup* oracle = nullptr);

}  // namespace picm
