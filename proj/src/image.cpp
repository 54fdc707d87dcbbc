#include "tonematch/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tonematch {

namespace {

void check_geometry(int width, int height, int channels, std::size_t n, const char* what) {
  if (width <= 0 || height <= 0) {
    throw DataError(std::string(what) + ": non-positive dimensions");
  }
  if (channels != 1 && channels != 3) {
    throw DataError(std::string(what) + ": channel count must be 1 or 3, got " +
                    std::to_string(channels));
  }
  if (n != static_cast<std::size_t>(width) * height * channels) {
    throw DataError(std::string(what) + ": data size does not match dimensions");
  }
}

}  // namespace

void HdrImage::validate() const {
  check_geometry(width, height, channels, data.size(), "HdrImage");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float v = data[i];
    if (!std::isfinite(v)) {
      throw DataError("HdrImage: non-finite sample at index " + std::to_string(i));
    }
    if (v < 0.0f) {
      throw DataError("HdrImage: negative sample at index " + std::to_string(i));
    }
  }
}

void LdrImage::validate() const {
  check_geometry(width, height, channels, data.size(), "LdrImage");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float v = data[i];
    if (!(v >= 0.0f && v <= 1.0f)) {  // catches NaN as well
      throw DataError("LdrImage: sample outside [0,1] at index " + std::to_string(i));
    }
  }
}

namespace {

template <typename Img>
Raster luminance_impl(const Img& img) {
  check_geometry(img.width, img.height, img.channels, img.data.size(), "luminance input");
  Raster out(img.width, img.height);
  const std::size_t n = img.pixel_count();
  if (img.channels == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      const float v = img.data[i];
      if (!std::isfinite(v)) {
        throw DataError("luminance: non-finite sample at pixel " + std::to_string(i));
      }
      out.data[i] = v;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const float r = img.data[3 * i + 0];
      const float g = img.data[3 * i + 1];
      const float b = img.data[3 * i + 2];
      if (!std::isfinite(r) || !std::isfinite(g) || !std::isfinite(b)) {
        throw DataError("luminance: non-finite sample at pixel " + std::to_string(i));
      }
      out.data[i] = kLumR * r + kLumG * g + kLumB * b;
    }
  }
  return out;
}

}  // namespace

Raster luminance(const HdrImage& img) { return luminance_impl(img); }
Raster luminance(const LdrImage& img) { return luminance_impl(img); }

Raster normalize(const Raster& lum, const NormalizationMode& mode) {
  if (lum.width <= 0 || lum.height <= 0 || lum.data.empty()) {
    throw DataError("normalize: empty raster");
  }
  if (mode.variant == NormalizationVariant::kLog && !(mode.epsilon > 0.0f)) {
    throw DataError("normalize: log epsilon must be > 0");
  }
  Raster out(lum.width, lum.height);
  const std::size_t n = lum.size();
  if (mode.variant == NormalizationVariant::kLog) {
    for (std::size_t i = 0; i < n; ++i) {
      out.data[i] = std::log(lum.data[i] + mode.epsilon);
    }
  } else {
    out.data = lum.data;
  }
  float lo = out.data[0], hi = out.data[0];
  for (std::size_t i = 1; i < n; ++i) {
    lo = std::min(lo, out.data[i]);
    hi = std::max(hi, out.data[i]);
  }
  if (!(hi > lo)) {
    // Degenerate (flat) input maps to all zeros.
    std::fill(out.data.begin(), out.data.end(), 0.0f);
    return out;
  }
  const float inv = 1.0f / (hi - lo);
  for (std::size_t i = 0; i < n; ++i) {
    out.data[i] = std::clamp((out.data[i] - lo) * inv, 0.0f, 1.0f);
  }
  return out;
}

namespace {

void check_color_inputs(const HdrImage& hdr, const Raster& l_out, const char* what) {
  check_geometry(hdr.width, hdr.height, hdr.channels, hdr.data.size(), what);
  if (l_out.width != hdr.width || l_out.height != hdr.height) {
    throw DataError(std::string(what) + ": luminance raster dimensions mismatch");
  }
  for (std::size_t i = 0; i < l_out.size(); ++i) {
    const float v = l_out.data[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw DataError(std::string(what) + ": target luminance outside [0,1] at pixel " +
                      std::to_string(i));
    }
  }
}

}  // namespace

LdrImage correct_color(const HdrImage& hdr, const Raster& l_out, float saturation) {
  if (!(saturation >= 0.0f && saturation <= 1.0f)) {
    throw DataError("correct_color: saturation must lie in [0,1]");
  }
  check_color_inputs(hdr, l_out, "correct_color");
  LdrImage out(hdr.width, hdr.height, hdr.channels);
  const std::size_t n = hdr.pixel_count();
  if (hdr.channels == 1) {
    for (std::size_t i = 0; i < n; ++i) out.data[i] = l_out.data[i];
    return out;
  }
  Raster lin = luminance(hdr);
  for (std::size_t i = 0; i < n; ++i) {
    const float l_in = lin.data[i];
    const float lo = l_out.data[i];
    for (int c = 0; c < 3; ++c) {
      float v;
      if (l_in < kLuminanceGuard) {
        v = lo;  // no stable ratio: neutral gray at the target luminance
      } else {
        const float ratio = hdr.data[3 * i + c] / l_in;
        float scale;
        if (saturation == 1.0f) {
          scale = ratio;  // keep reproduce_color's exact arithmetic path
        } else {
          scale = (ratio - 1.0f) * saturation + 1.0f;
        }
        v = scale * lo;
      }
      out.data[3 * i + c] = std::clamp(v, 0.0f, 1.0f);
    }
  }
  return out;
}

LdrImage reproduce_color(const HdrImage& hdr, const Raster& l_out) {
  return correct_color(hdr, l_out, 1.0f);
}

LdrImage ldr_from_raster(const Raster& r) {
  LdrImage out(r.width, r.height, 1);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const float v = r.data[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw DataError("ldr_from_raster: value outside [0,1] at pixel " + std::to_string(i));
    }
    out.data[i] = v;
  }
  return out;
}

Raster raster_from_ldr(const LdrImage& img) {
  if (img.channels != 1) {
    throw DataError("raster_from_ldr: expected a single-channel image");
  }
  Raster out(img.width, img.height);
  out.data = img.data;
  return out;
}

}  // namespace tonematch
