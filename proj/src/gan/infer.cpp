#include <algorithm>
#include <chrono>
#include <filesystem>

#include "ckpt_meta.hpp"
#include "tonematch/common.hpp"
#include "tonematch/gan.hpp"

namespace tonematch::gan {

namespace {

// Pads right/bottom by mirror reflection (no repeated edge sample; clamped
// once the mirror runs past the top-left for very small inputs).
Raster pad_reflect_to_multiple(const Raster& src, int m) {
  const int oh = (src.height + m - 1) / m * m;
  const int ow = (src.width + m - 1) / m * m;
  if (oh == src.height && ow == src.width) return src;
  Raster out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    int sy = y < src.height ? y : 2 * src.height - 2 - y;
    sy = std::clamp(sy, 0, src.height - 1);
    for (int x = 0; x < ow; ++x) {
      int sx = x < src.width ? x : 2 * src.width - 2 - x;
      sx = std::clamp(sx, 0, src.width - 1);
      out.at(y, x) = src.at(sy, sx);
    }
  }
  return out;
}

Raster crop_top_left(const Raster& src, int h, int w) {
  if (h == src.height && w == src.width) return src;
  Raster out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(y, x) = src.at(y, x);
  return out;
}

}  // namespace

LdrImage infer(const std::filesystem::path& ckpt, const HdrImage& hdr,
               float saturation, double* seconds) {
  hdr.validate();
  const std::vector<NamedTensorData> tensors = nn::read_checkpoint(ckpt);
  const detail::CkptMeta meta = detail::read_meta(tensors);
  Generator g(detail::generator_config_of(meta));
  g.load(tensors);

  const auto t0 = std::chrono::steady_clock::now();
  const Raster lum = luminance(hdr);
  const NormalizationMode mode{meta.input_norm, meta.input_norm_eps};
  const Raster norm = normalize(lum, mode);
  const int align = 1 << meta.n_down;
  const Raster padded = pad_reflect_to_multiple(norm, align);
  const Tensor out = g.forward(tensor_from_raster(padded, false));
  const Raster mapped = crop_top_left(raster_from_tensor(out), hdr.height, hdr.width);
  LdrImage result = hdr.channels == 1 ? ldr_from_raster(mapped)
                                      : correct_color(hdr, mapped, saturation);
  if (seconds) {
    const auto t1 = std::chrono::steady_clock::now();
    *seconds = std::chrono::duration<double>(t1 - t0).count();
  }
  return result;
}

}  // namespace tonematch::gan
