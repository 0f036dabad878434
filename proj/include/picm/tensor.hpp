#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace picm {

inline constexpr float kScaleFloor = 1e-6f;

// Latent tensor with per-coefficient mean and scale side fields.
// Layout is a fixed raster: h outermost, then w, then c.
struct LatentGrid {
  uint32_t height = 0;
  uint32_t width = 0;
  uint32_t channels = 0;
  std::vector<float> values;
  std::vector<float> means;
  std::vector<float> scales;

  size_t size() const { return values.size(); }
};

inline size_t flat_index(uint32_t h, uint32_t w, uint32_t c, uint32_t W, uint32_t C) {
  return (static_cast<size_t>(h) * W + w) * C + c;
}

struct Coord {
  uint32_t h, w, c;
};

inline Coord unflat_index(size_t i, uint32_t W, uint32_t C) {
  uint32_t c = static_cast<uint32_t>(i % C);
  size_t hw = i / C;
  return Coord{static_cast<uint32_t>(hw / W), static_cast<uint32_t>(hw % W), c};
}

double round_half_away(double x);

// Rounds every value half away from zero. Errors on non-finite values.
LatentGrid quantize(const LatentGrid& g);

LatentGrid load_grid(const std::string& path);
void save_grid(const LatentGrid& g, const std::string& path);

struct ConstantScale {
  double sigma;
};
struct LogUniformScale {
  double lo, hi;
};
using ScaleLaw = std::variant<ConstantScale, LogUniformScale>;

LatentGrid synth_grid(uint64_t seed, uint32_t height, uint32_t width, uint32_t channels,
                      const ScaleLaw& law);

}  // namespace picm
