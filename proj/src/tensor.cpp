#include "picm/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "picm/bytes.hpp"
#include "picm/error.hpp"
#include "picm/rng.hpp"

namespace picm {

namespace {

constexpr char kMagic[4] = {'P', 'I', 'C', 'L'};
constexpr uint8_t kVersion = 1;
constexpr uint64_t kMaxElems = 1ull << 28;

uint64_t checked_size(uint32_t h, uint32_t w, uint32_t c) {
  if (h == 0 || w == 0 || c == 0) fail(Errc::dim_overflow, "zero dimension");
  uint64_t s = static_cast<uint64_t>(h) * w * c;
  if (s > kMaxElems) fail(Errc::dim_overflow, "grid too large: " + std::to_string(s) + " elements");
  return s;
}

void check_finite(const std::vector<float>& a, const char* name) {
  for (size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]))
      fail(Errc::non_finite_value, std::string(name) + "[" + std::to_string(i) + "] is not finite");
  }
}

}  // namespace

double round_half_away(double x) {
  return x >= 0.0 ? std::floor(x + 0.5) : std::ceil(x - 0.5);
}

LatentGrid quantize(const LatentGrid& g) {
  LatentGrid out = g;
  for (size_t i = 0; i < out.values.size(); ++i) {
    double v = out.values[i];
    if (!std::isfinite(v))
      fail(Errc::non_finite_value, "value[" + std::to_string(i) + "] is not finite");
    out.values[i] = static_cast<float>(round_half_away(v));
  }
  return out;
}

LatentGrid load_grid(const std::string& path) {
  std::vector<uint8_t> data = read_file(path);
  ByteReader r(data.data(), data.size());
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) fail(Errc::bad_magic, "not a latent tensor file: " + path);
  uint8_t ver = r.u8();
  if (ver != kVersion) fail(Errc::bad_version, "unsupported tensor version " + std::to_string(ver));
  LatentGrid g;
  g.height = r.u32();
  g.width = r.u32();
  g.channels = r.u32();
  uint64_t s = checked_size(g.height, g.width, g.channels);
  if (r.remaining() != s * 12)
    fail(Errc::truncated_payload, "payload holds " + std::to_string(r.remaining()) +
                                      " bytes, expected " + std::to_string(s * 12));
  g.values.resize(s);
  g.means.resize(s);
  g.scales.resize(s);
  r.raw(g.values.data(), s * 4);
  r.raw(g.means.data(), s * 4);
  r.raw(g.scales.data(), s * 4);
  check_finite(g.values, "value");
  check_finite(g.means, "mean");
  check_finite(g.scales, "scale");
  for (auto& sc : g.scales)
    if (sc < kScaleFloor) sc = kScaleFloor;
  return g;
}

void save_grid(const LatentGrid& g, const std::string& path) {
  uint64_t s = checked_size(g.height, g.width, g.channels);
  if (g.values.size() != s || g.means.size() != s || g.scales.size() != s)
    fail(Errc::bad_argument, "grid field sizes disagree with dimensions");
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u8(kVersion);
  w.u32(g.height);
  w.u32(g.width);
  w.u32(g.channels);
  w.raw(g.values.data(), s * 4);
  w.raw(g.means.data(), s * 4);
  w.raw(g.scales.data(), s * 4);
  write_file(path, w.bytes.data(), w.bytes.size());
}

LatentGrid synth_grid(uint64_t seed, uint32_t height, uint32_t width, uint32_t channels,
                      const ScaleLaw& law) {
  uint64_t s = checked_size(height, width, channels);
  LatentGrid g;
  g.height = height;
  g.width = width;
  g.channels = channels;
  g.values.resize(s);
  g.means.resize(s);
  g.scales.resize(s);

  Rng rng(seed);
  if (const auto* c = std::get_if<ConstantScale>(&law)) {
    if (!(c->sigma > 0.0)) fail(Errc::bad_argument, "constant scale must be positive");
    float sc = static_cast<float>(c->sigma);
    if (sc < kScaleFloor) sc = kScaleFloor;
    for (auto& v : g.scales) v = sc;
  } else {
    const auto& lu = std::get<LogUniformScale>(law);
    if (!(lu.lo > 0.0) || !(lu.hi >= lu.lo))
      fail(Errc::bad_argument, "log-uniform bounds must satisfy 0 < lo <= hi");
    double llo = fixed_log(lu.lo), lhi = fixed_log(lu.hi);
    for (auto& v : g.scales) {
      float sc = static_cast<float>(fixed_exp(llo + rng.uniform() * (lhi - llo)));
      v = sc < kScaleFloor ? kScaleFloor : sc;
    }
  }
  for (size_t i = 0; i < s; ++i)
    g.values[i] = static_cast<float>(static_cast<double>(g.scales[i]) * rng.normal());
  for (size_t i = 0; i < s; ++i) g.means[i] = static_cast<float>(rng.normal());
  return g;
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) fail(Errc::io, "cannot open " + path);
  std::fseek(f, 0, SEEK_END);
  long n = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<uint8_t> data(n > 0 ? static_cast<size_t>(n) : 0);
  size_t got = data.empty() ? 0 : std::fread(data.data(), 1, data.size(), f);
  std::fclose(f);
  if (got != data.size()) fail(Errc::io, "short read from " + path);
  return data;
}

void write_file(const std::string& path, const void* data, size_t size) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) fail(Errc::io, "cannot open " + path + " for writing");
  size_t put = size ? std::fwrite(data, 1, size, f) : 0;
  int rc = std::fclose(f);
  if (put != size || rc != 0) fail(Errc::io, "short write to " + path);
}

}  // namespace picm
