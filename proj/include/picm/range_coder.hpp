#pragma once

#include <cstdint>
#include <vector>

#include "picm/gaussian.hpp"

namespace picm {

// Byte-oriented range coder: 32-bit range renormalized below 2^24, 64-bit low
// so carries ripple through a cached 0xFF run. Subdivision uses 64-bit
// products, so the per-symbol overhead stays near 2^-24 bits.
class RangeEncoder {
 public:
  void encode_trit(int digit, const TritMasses& tm);
  std::vector<uint8_t> finish();
  bool finished() const { return finished_; }
  uint64_t bytes_emitted() const { return out_.size(); }
  uint32_t range() const { return range_; }

 private:
  void shift_low();
  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  bool finished_ = false;
  std::vector<uint8_t> out_;
};

// Decodes a byte prefix. The window is tracked as an interval covering every
// possible continuation of the missing bytes; a symbol is produced only when
// all continuations agree, so a truncated prefix can never yield a wrong
// symbol. kTruncated is a recoverable condition, not an error.
class RangeDecoder {
 public:
  static constexpr int kTruncated = -1;

  RangeDecoder(const uint8_t* data, size_t size);

  int decode_trit(const TritMasses& tm);
  uint64_t bytes_consumed() const { return consumed_; }
  uint32_t range() const { return range_; }

 private:
  void shift_in();
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_lo_ = 0;
  uint32_t code_hi_ = 0;
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  uint64_t consumed_ = 0;
};

}  // namespace picm
