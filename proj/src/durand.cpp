// Bilateral base/detail decomposition in log10 luminance: the base layer is
// compressed toward a target contrast, detail is carried over unchanged.

#include <algorithm>
#include <cmath>
#include <vector>

#include "tonematch/tmo.hpp"

namespace tonematch {

Raster bilateral_filter(const Raster& in, float sigma_s, float sigma_r) {
  if (!(sigma_s > 0.0f) || !(sigma_r > 0.0f)) {
    throw DataError("bilateral_filter: sigmas must be > 0");
  }
  const int radius = static_cast<int>(std::ceil(3.0f * sigma_s));
  const double inv_2ss = 1.0 / (2.0 * static_cast<double>(sigma_s) * sigma_s);
  const double inv_2sr = 1.0 / (2.0 * static_cast<double>(sigma_r) * sigma_r);

  // spatial kernel is separable in dx/dy only as a product; precompute 1D
  std::vector<double> spatial(2 * radius + 1);
  for (int d = -radius; d <= radius; ++d) {
    spatial[d + radius] = std::exp(-static_cast<double>(d) * d * inv_2ss);
  }

  Raster out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      const double center = in.at(y, x);
      double num = 0.0, den = 0.0;
      const int y0 = std::max(0, y - radius), y1 = std::min(in.height - 1, y + radius);
      const int x0 = std::max(0, x - radius), x1 = std::min(in.width - 1, x + radius);
      for (int yy = y0; yy <= y1; ++yy) {
        const double wy = spatial[yy - y + radius];
        for (int xx = x0; xx <= x1; ++xx) {
          const double v = in.at(yy, xx);
          const double dr = v - center;
          const double w = wy * spatial[xx - x + radius] * std::exp(-dr * dr * inv_2sr);
          num += w * v;
          den += w;
        }
      }
      out.at(y, x) = static_cast<float>(num / den);  // den >= center weight > 0
    }
  }
  return out;
}

Raster durand_tmo(const Raster& lum, const TmoParams& p) {
  const double contrast = p.get("contrast", 50.0);
  const double sigma_r = p.get("sigma_r", 0.4);
  const double sigma_s_frac = p.get("sigma_s_frac", 0.02);
  if (!(contrast > 1.0)) throw DataError("durand: contrast must be > 1");
  if (!(sigma_r > 0.0) || !(sigma_s_frac > 0.0)) {
    throw DataError("durand: sigma_r and sigma_s_frac must be > 0");
  }

  Raster logl(lum.width, lum.height);
  for (std::size_t i = 0; i < lum.size(); ++i) {
    logl.data[i] = std::log10(lum.data[i]);
  }

  const float diag = std::sqrt(static_cast<float>(lum.width) * lum.width +
                               static_cast<float>(lum.height) * lum.height);
  const float sigma_s = static_cast<float>(sigma_s_frac) * diag;
  Raster base = bilateral_filter(logl, sigma_s, static_cast<float>(sigma_r));

  float bmin = base.data[0], bmax = base.data[0];
  for (float v : base.data) {
    bmin = std::min(bmin, v);
    bmax = std::max(bmax, v);
  }
  // compression factor steers the base range onto log10(contrast);
  // a flat base (single-intensity image) needs no compression
  const double c = bmax > bmin ? std::log10(contrast) / (bmax - bmin) : 1.0;

  Raster out(lum.width, lum.height);
  double omax = -1e300;
  std::vector<double> work(lum.size());
  for (std::size_t i = 0; i < lum.size(); ++i) {
    const double detail = logl.data[i] - base.data[i];
    work[i] = base.data[i] * c + detail;
    omax = std::max(omax, work[i]);
  }
  // exponentiate relative to the max so pow10 stays in range, then min-max
  double lo = 1e300, hi = -1e300;
  for (std::size_t i = 0; i < lum.size(); ++i) {
    work[i] = std::pow(10.0, work[i] - omax);
    lo = std::min(lo, work[i]);
    hi = std::max(hi, work[i]);
  }
  if (!(hi > lo)) return out;  // flat -> zeros
  const double inv = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < lum.size(); ++i) {
    out.data[i] = static_cast<float>(std::clamp((work[i] - lo) * inv, 0.0, 1.0));
  }
  return out;
}

}  // namespace tonematch
