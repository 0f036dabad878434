#include "picm/trit_plane.hpp"

#include <bit>
#include <string>
#include <unordered_map>

#include "picm/error.hpp"
#include "picm/gaussian.hpp"

namespace picm {

TritPlaneStack decompose(const LatentGrid& quantized, bool clamp_out_of_range) {
  size_t s = quantized.size();
  TritPlaneStack st;
  st.count = s;
  st.lengths.resize(s);
  int max_len = 1;
  for (size_t c = 0; c < s; ++c) {
    int len = plane_length(quantized.scales[c]);
    if (len > kMaxPlaneLength)
      fail(Errc::bad_argument, "scale " + std::to_string(quantized.scales[c]) + " at index " +
                                   std::to_string(c) + " needs plane length " +
                                   std::to_string(len) + " > " + std::to_string(kMaxPlaneLength));
    st.lengths[c] = static_cast<uint8_t>(len);
    if (len > max_len) max_len = len;
  }
  st.max_length = max_len;
  st.digits.assign(s * max_len, kSentinel);

  for (size_t c = 0; c < s; ++c) {
    double v = quantized.values[c];
    if (round_half_away(v) != v)
      fail(Errc::bad_argument, "value[" + std::to_string(c) + "] = " + std::to_string(v) +
                                   " is not integer-valued; quantize first");
    int len = st.lengths[c];
    int64_t off = pow3(len) / 2;
    int64_t iv = static_cast<int64_t>(v);
    if (iv < -off || iv > off) {
      if (clamp_out_of_range) {
        iv = iv < 0 ? -off : off;
      } else {
        fail(Errc::out_of_range_coeff,
             "value[" + std::to_string(c) + "] = " + std::to_string(iv) + " outside [" +
                 std::to_string(-off) + ", " + std::to_string(off) + "] for plane length " +
                 std::to_string(len));
      }
    }
    int64_t sym = iv + off;
    int base = max_len - len;
    for (int l = len - 1; l >= 0; --l) {
      st.digit(c, base + l) = static_cast<int8_t>(sym % 3);
      sym /= 3;
    }
  }
  return st;
}

std::vector<uint32_t> plane_slots(const std::vector<uint8_t>& lengths, int max_length, int g) {
  if (g < 0 || g >= max_length)
    fail(Errc::bad_argument,
         "plane " + std::to_string(g) + " outside [0, " + std::to_string(max_length) + ")");
  std::vector<uint32_t> slots;
  for (size_t c = 0; c < lengths.size(); ++c)
    if (lengths[c] >= max_length - g) slots.push_back(static_cast<uint32_t>(c));
  return slots;
}

std::vector<uint32_t> plane_slots(const TritPlaneStack& stack, int g) {
  return plane_slots(stack.lengths, stack.max_length, g);
}

std::vector<double> recompose(const TritPlaneStack& stack,
                              const std::vector<uint8_t>& decoded_trits,
                              const std::vector<float>& scales) {
  if (decoded_trits.size() != stack.count || scales.size() != stack.count)
    fail(Errc::bad_argument, "field sizes disagree with stack");
  std::unordered_map<uint64_t, BinPmf> cache;
  std::vector<double> out(stack.count);
  for (size_t c = 0; c < stack.count; ++c) {
    int len = stack.lengths[c];
    int known = decoded_trits[c];
    if (known > len)
      fail(Errc::bad_argument, "decoded_trits[" + std::to_string(c) + "] = " +
                                   std::to_string(known) + " exceeds length " +
                                   std::to_string(len));
    int base = stack.max_length - len;
    if (known == len) {
      int64_t sym = 0;
      for (int l = 0; l < len; ++l) sym = sym * 3 + stack.digit(c, base + l);
      out[c] = static_cast<double>(sym - pow3(len) / 2);
      continue;
    }
    double sigma = scales[c];
    uint64_t key = std::bit_cast<uint64_t>(sigma) ^ (static_cast<uint64_t>(len) << 1);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, build_pmf(sigma, len)).first;
    BinPmf window = it->second;
    for (int l = 0; l < known; ++l) window = refine_interval(window, stack.digit(c, base + l));
    out[c] = conditional_mean(window);
  }
  return out;
}

}  // namespace picm
