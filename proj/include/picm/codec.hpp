#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "picm/prioritizer.hpp"
#include "picm/tensor.hpp"

namespace picm {

struct StreamHeader {
  uint32_t height = 0;
  uint32_t width = 0;
  uint32_t channels = 0;
  Strategy strategy = Strategy::expected_variance;
  bool order_embedded = false;
  uint64_t seed = 0;
  float log_scale_lo = 0;  // natural-log bounds of the scale quantizer
  float log_scale_hi = 0;
  float mean_lo = 0;
  float mean_hi = 0;
};

// Truncatable container: header, 16-bit side-field codes, cut table, optional
// group order, then the range-coded payload. Every byte prefix that covers the
// fixed part decodes to a valid reconstruction.
struct ProgressiveBitstream {
  StreamHeader header;
  std::vector<uint16_t> scale_codes;
  std::vector<uint16_t> mean_codes;
  // Payload-relative byte offsets: cuts[0] = 0, then K evenly spaced symbol
  // checkpoints per plane. The final entry is the flushed payload size, so the
  // coder's tail bytes are attributed to the last plane.
  std::vector<uint64_t> cuts;
  std::vector<uint32_t> group_order;  // group ids, best first; iff order_embedded
  std::vector<uint8_t> payload;

  size_t fixed_prefix_size() const;
  size_t total_size() const { return fixed_prefix_size() + payload.size(); }
};

std::vector<uint8_t> serialize(const ProgressiveBitstream& bs);
ProgressiveBitstream parse(const std::vector<uint8_t>& bytes);

// 16-bit uniform quantizer over promoted f32 bounds. Degenerate bounds
// (hi == lo) map everything to code 0 and back to lo.
uint16_t quant_code(double x, float lo, float hi);
double dequant_value(float lo, float hi, uint16_t code);

// Dequantized side fields, materialized through f32 so the in-memory grid,
// the coder model, and both ends of the wire use bit-identical numbers.
struct SideModel {
  float log_scale_lo = 0;
  float log_scale_hi = 0;
  float mean_lo = 0;
  float mean_hi = 0;
  std::vector<uint16_t> scale_codes;
  std::vector<uint16_t> mean_codes;
  std::vector<double> sigmas;  // >= scale floor
  std::vector<double> means;
};

SideModel build_side_model(const LatentGrid& grid);
SideModel side_model_from_stream(const ProgressiveBitstream& bs);

// Rounded values plus the dequantized side fields: the one grid both coder
// sides derive plane lengths and PMFs from.
LatentGrid model_grid(const LatentGrid& quantized, const SideModel& side);

struct EncodeOptions {
  uint64_t seed = 0;
  int checkpoints_per_plane = 16;
  bool embed_group_order = false;   // oracle strategies only
  bool clamp_out_of_range = false;  // clamp coefficients past the symbol range
  const OracleSetup* oracle = nullptr;
};

struct EncodeResult {
  ProgressiveBitstream stream;
  uint64_t symbols_total = 0;
  std::vector<uint64_t> plane_symbols;
  double ideal_bits = 0;     // sum of -log2(coded mass / total) over the payload
  double estimate_bits = 0;  // sum of per-coefficient modeled bit costs
  double quant_mse = 0;      // mean squared rounding error of the input values
  uint64_t order_hash = 0;
  std::vector<uint32_t> group_order;  // oracle strategies, embedded or not
};

// Rounds the values, quantizes the side fields, and range-codes the trit
// planes in priority order. Oracle strategies need opt.oracle.
EncodeResult encode(const LatentGrid& grid, Strategy strategy, const EncodeOptions& opt = {});

struct DecodeBudget {
  enum class Kind { full, bytes, level };
  Kind kind = Kind::full;
  uint64_t value = 0;

  static DecodeBudget full() { return {Kind::full, 0}; }
  static DecodeBudget bytes(uint64_t n) { return {Kind::bytes, n}; }
  static DecodeBudget level(uint64_t k) { return {Kind::level, k}; }
};

struct DecodeOptions {
  // External group order for oracle streams that do not embed one.
  std::optional<std::vector<uint32_t>> group_order;
};

struct DecodeResult {
  LatentGrid grid;               // values = centered + mean; dequantized side fields
  std::vector<double> centered;  // exact centered reconstruction
  std::vector<uint8_t> decoded;  // digits known per coefficient
  std::vector<uint64_t> plane_symbols;      // decoded per plane
  std::vector<uint64_t> plane_slot_totals;  // coded slots per plane
  uint64_t symbols_decoded = 0;
  uint64_t payload_bytes_available = 0;
  uint64_t payload_bytes_consumed = 0;
  bool truncated = false;
  int planes_ordered = 0;    // planes whose order was reconstructed
  uint64_t order_hash = 0;   // over those planes
};

// Byte budgets count the whole container; level budgets index the cut table.
// The decoder stops at the first symbol the budget cannot pin down and fills
// the rest with conditional means.
DecodeResult decode(const ProgressiveBitstream& bs, const DecodeBudget& budget,
                    const DecodeOptions& opt = {});

struct RateReport {
  struct PlaneRow {
    int plane = 0;
    uint64_t start = 0;  // payload-relative
    uint64_t end = 0;
  };
  struct LevelRow {
    int level = 0;
    uint64_t offset = 0;      // payload-relative
    uint64_t total_bits = 0;  // prefix + offset, in bits
    double bpp = 0;
  };
  uint64_t pixel_count = 0;  // nominal image pixels: 256 * height * width
  uint64_t prefix_bytes = 0;
  uint64_t payload_bytes = 0;
  int planes = 0;
  int checkpoints_per_plane = 0;
  std::vector<PlaneRow> plane_rows;
  std::vector<LevelRow> level_rows;
};

RateReport rate_report(const ProgressiveBitstream& bs);

}  // namespace picm
