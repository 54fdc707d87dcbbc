#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tonematch/common.hpp"

namespace tonematch {

// Single-channel float raster, row-major. The workhorse carrier for
// luminance planes, tone-mapped outputs and scalar fields.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Raster() = default;
  Raster(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Raster& o) const { return width == o.width && height == o.height; }
};

// Scene-referred image: linear radiance, finite, non-negative, 1 or 3 channels,
// interleaved row-major.
struct HdrImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  HdrImage() = default;
  HdrImage(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  float& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  // Throws DataError naming the first offending sample.
  void validate() const;
};

// Display-referred image: every sample in [0, 1], 1 or 3 channels.
struct LdrImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  LdrImage() = default;
  LdrImage(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  float& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  void validate() const;
};

enum class NormalizationVariant { kLinear, kLog };

struct NormalizationMode {
  NormalizationVariant variant = NormalizationVariant::kLinear;
  // Guard added inside the log: ln(x + epsilon). Must be > 0.
  float epsilon = 1e-6f;
};

// Rec.709 luminance weights used for all RGB->luminance reductions.
inline constexpr float kLumR = 0.2126f;
inline constexpr float kLumG = 0.7152f;
inline constexpr float kLumB = 0.0722f;

// Below this, a pixel's luminance is treated as zero for color transfer and
// the output falls back to neutral gray at the target luminance.
inline constexpr float kLuminanceGuard = 1e-9f;

// Luminance plane. 3-channel: Rec.709 weighted sum; 1-channel: copy.
// Non-finite samples are rejected with a diagnostic naming the pixel index.
Raster luminance(const HdrImage& img);
Raster luminance(const LdrImage& img);

// Min-max normalization to [0, 1]. kLog takes ln(x + eps) first, then
// min-max. A flat input (max == min) maps to all zeros.
Raster normalize(const Raster& lum, const NormalizationMode& mode = {});

// Ratio-preserving color transfer: C_out = (C_in / L_in) * L_out, clamped to
// [0, 1]. Pixels with L_in < kLuminanceGuard come out gray at L_out.
LdrImage reproduce_color(const HdrImage& hdr, const Raster& l_out);

// Saturation-controlled transfer: C_out = ((C_in / L_in - 1) * s + 1) * L_out.
// s must lie in [0, 1]; s = 1 is identical (bit-for-bit) to reproduce_color,
// s = 0 is achromatic.
LdrImage correct_color(const HdrImage& hdr, const Raster& l_out, float saturation);

// Helpers shared by the tools and bindings.
LdrImage ldr_from_raster(const Raster& r);
Raster raster_from_ldr(const LdrImage& img);  // 1-channel only

}  // namespace tonematch
