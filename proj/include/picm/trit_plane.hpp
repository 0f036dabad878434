#pragma once

#include <cstdint>
#include <vector>

#include "picm/tensor.hpp"

namespace picm {

inline constexpr int8_t kSentinel = -1;

// Ternary digits of every coefficient, aligned at the least significant
// plane: coefficient c with length L_c occupies global planes
// [max_length - L_c, max_length). digit(c, g) is kSentinel outside that span.
struct TritPlaneStack {
  size_t count = 0;
  int max_length = 0;
  std::vector<uint8_t> lengths;
  std::vector<int8_t> digits;  // count x max_length

  int8_t digit(size_t c, int g) const { return digits[c * max_length + g]; }
  int8_t& digit(size_t c, int g) { return digits[c * max_length + g]; }
  int first_plane(size_t c) const { return max_length - lengths[c]; }
};

// Shifts each integer value by floor(3^L/2) and expands it in base 3,
// most significant digit first. Lengths come from the scale field. Values
// outside the symbol range error with the offending index unless
// clamp_out_of_range is set.
TritPlaneStack decompose(const LatentGrid& quantized, bool clamp_out_of_range = false);

// Coefficients occupying global plane g, ascending flat index. The
// lengths-only form serves the decoder, which knows lengths before digits.
std::vector<uint32_t> plane_slots(const std::vector<uint8_t>& lengths, int max_length, int g);
std::vector<uint32_t> plane_slots(const TritPlaneStack& stack, int g);

// Centered reconstruction from the first decoded_trits[c] digits of each
// coefficient: the exact value when all digits are known, otherwise the
// conditional mean of the refined probability window.
std::vector<double> recompose(const TritPlaneStack& stack,
                              const std::vector<uint8_t>& decoded_trits,
                              const std::vector<float>& scales);

}  // namespace picm
