#include "picm/range_coder.hpp"

#include <string>

#include "picm/error.hpp"

namespace picm {

namespace {

constexpr uint32_t kTop = 1u << 24;

void check_masses(const TritMasses& tm) {
  if (tm.total == 0 || tm.total > kFreqTotal)
    fail(Errc::bad_argument, "mass total " + std::to_string(tm.total) + " outside (0, 2^16]");
  if (tm.m[0] + tm.m[1] + tm.m[2] != tm.total)
    fail(Errc::bad_argument, "trit masses do not sum to the stated total");
}

}  // namespace

void RangeEncoder::shift_low() {
  if (static_cast<uint32_t>(low_ >> 32) != 0 || static_cast<uint32_t>(low_) < 0xFF000000u) {
    uint8_t carry = static_cast<uint8_t>(low_ >> 32);
    do {
      out_.push_back(static_cast<uint8_t>(cache_ + carry));
      cache_ = 0xFF;
    } while (--cache_size_);
    cache_ = static_cast<uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFull) << 8;
}

void RangeEncoder::encode_trit(int digit, const TritMasses& tm) {
  if (finished_) fail(Errc::bad_argument, "encoder already finished");
  if (digit < 0 || digit > 2) fail(Errc::bad_argument, "digit must be 0, 1 or 2");
  check_masses(tm);
  if (tm.m[digit] == 0) fail(Errc::bad_argument, "cannot encode a zero-frequency symbol");
  uint32_t cum = 0;
  for (int d = 0; d < digit; ++d) cum += tm.m[d];
  uint64_t r = range_;
  uint64_t lo_off = r * cum / tm.total;
  uint64_t hi_off =
      (cum + tm.m[digit] == tm.total) ? r : r * (cum + tm.m[digit]) / tm.total;
  low_ += lo_off;
  range_ = static_cast<uint32_t>(hi_off - lo_off);
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

std::vector<uint8_t> RangeEncoder::finish() {
  if (finished_) fail(Errc::bad_argument, "encoder already finished");
  finished_ = true;
  for (int i = 0; i < 5; ++i) shift_low();
  return out_;
}

RangeDecoder::RangeDecoder(const uint8_t* data, size_t size) : data_(data), size_(size) {
  for (int i = 0; i < 5; ++i) shift_in();
  // A valid stream always satisfies code <= range - 1. Clamping the upper
  // completion to that keeps it there through every later shift, so the
  // window arithmetic can never overflow 32 bits.
  if (code_hi_ == 0xFFFFFFFFu) code_hi_ = 0xFFFFFFFEu;
}

void RangeDecoder::shift_in() {
  if (pos_ < size_) {
    uint8_t b = data_[pos_];
    code_lo_ = (code_lo_ << 8) | b;
    code_hi_ = (code_hi_ << 8) | b;
    ++consumed_;
  } else {
    code_lo_ = code_lo_ << 8;
    code_hi_ = (code_hi_ << 8) | 0xFF;
  }
  ++pos_;
}

int RangeDecoder::decode_trit(const TritMasses& tm) {
  check_masses(tm);
  uint64_t r = range_;
  uint64_t b1 = r * tm.m[0] / tm.total;
  uint64_t b2 = r * (tm.m[0] + tm.m[1]) / tm.total;
  auto locate = [&](uint32_t code) -> int {
    if (code < b1) return 0;
    if (code < b2) return 1;
    return 2;
  };
  int d_lo = locate(code_lo_);
  int d_hi = locate(code_hi_);
  if (d_lo != d_hi) return kTruncated;
  int d = d_lo;
  uint64_t lo_off = d == 0 ? 0 : (d == 1 ? b1 : b2);
  uint64_t hi_off = d == 0 ? b1 : (d == 1 ? b2 : r);
  code_lo_ -= static_cast<uint32_t>(lo_off);
  code_hi_ -= static_cast<uint32_t>(lo_off);
  range_ = static_cast<uint32_t>(hi_off - lo_off);
  while (range_ < kTop) {
    shift_in();
    range_ <<= 8;
  }
  return d;
}

}  // namespace picm
