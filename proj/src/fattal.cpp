// Gradient-domain compression: attenuate large log-luminance gradients with
// a multiscale factor built on a Gaussian pyramid, then reintegrate by
// solving a Poisson equation.

#include <algorithm>
#include <cmath>
#include <vector>

#include "tonematch/tmo.hpp"

namespace tonematch {

namespace {

// 5-tap binomial [1 4 6 4 1]/16, separable, mirrored at borders; decimate by 2.
Raster pyramid_down(const Raster& in) {
  const int w = in.width, h = in.height;
  auto mirror = [](int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
  };
  static const double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  Raster tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -2; t <= 2; ++t) acc += k[t + 2] * in.at(y, mirror(x + t, w));
      tmp.at(y, x) = static_cast<float>(acc);
    }
  }
  Raster blurred(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -2; t <= 2; ++t) acc += k[t + 2] * tmp.at(mirror(y + t, h), x);
      blurred.at(y, x) = static_cast<float>(acc);
    }
  }
  const int ow = (w + 1) / 2, oh = (h + 1) / 2;
  Raster out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      out.at(y, x) = blurred.at(std::min(2 * y, h - 1), std::min(2 * x, w - 1));
    }
  }
  return out;
}

// Bilinear resize with half-pixel centers (matches the dataset resizer).
Raster upsample_to(const Raster& in, int ow, int oh) {
  Raster out(ow, oh);
  const double sx = static_cast<double>(in.width) / ow;
  const double sy = static_cast<double>(in.height) / oh;
  for (int y = 0; y < oh; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(in.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, in.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < ow; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(in.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, in.width - 1);
      const double wx = fx - x0;
      const double v = (1 - wy) * ((1 - wx) * in.at(y0, x0) + wx * in.at(y0, x1)) +
                       wy * ((1 - wx) * in.at(y1, x0) + wx * in.at(y1, x1));
      out.at(y, x) = static_cast<float>(v);
    }
  }
  return out;
}

// Per-level attenuation phi = (|grad|/alpha)^(beta-1) with alpha tied to the
// level's mean gradient magnitude. beta < 1 shrinks strong edges and mildly
// amplifies texture; tiny magnitudes are floored to keep the power bounded.
Raster attenuation_at_level(const Raster& h, double alpha_frac, double beta) {
  const int w = h.width, hh = h.height;
  Raster mag(w, hh);
  double mean_mag = 0.0;
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      const int ym = std::max(y - 1, 0), yp = std::min(y + 1, hh - 1);
      const double gx = (h.at(y, xp) - h.at(y, xm)) / 2.0;
      const double gy = (h.at(yp, x) - h.at(ym, x)) / 2.0;
      const double m = std::sqrt(gx * gx + gy * gy);
      mag.at(y, x) = static_cast<float>(m);
      mean_mag += m;
    }
  }
  mean_mag /= static_cast<double>(mag.size());
  const double alpha = std::max(alpha_frac * mean_mag, 1e-8);
  Raster phi(w, hh);
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double m = std::max(static_cast<double>(mag.data[i]), 1e-4 * alpha);
    phi.data[i] = static_cast<float>(std::pow(m / alpha, beta - 1.0));
  }
  return phi;
}

}  // namespace

Raster fattal_tmo(const Raster& lum, const TmoParams& p) {
  const double alpha_frac = p.get("alpha_frac", 0.1);
  const double beta = p.get("beta", 0.85);
  const int levels = static_cast<int>(p.get("levels", 4.0));
  const double tol = p.get("tol", 1e-4);
  const int max_iters = static_cast<int>(p.get("max_iters", 10000.0));
  if (!(alpha_frac > 0.0)) throw DataError("fattal: alpha_frac must be > 0");
  if (!(beta > 0.0 && beta <= 1.0)) throw DataError("fattal: beta must lie in (0,1]");
  if (levels < 1) throw DataError("fattal: levels must be >= 1");
  if (lum.width < 4 || lum.height < 4) {
    throw DataError("fattal: raster too small (needs at least 4x4)");
  }

  Raster h(lum.width, lum.height);
  for (std::size_t i = 0; i < lum.size(); ++i) h.data[i] = std::log(lum.data[i]);

  // Gaussian pyramid, capped so the coarsest level keeps a few pixels.
  std::vector<Raster> pyr;
  pyr.push_back(h);
  for (int l = 1; l < levels; ++l) {
    const Raster& prev = pyr.back();
    if (prev.width < 8 || prev.height < 8) break;
    pyr.push_back(pyramid_down(prev));
  }

  // Multiplicative attenuation accumulated coarse-to-fine.
  Raster total = attenuation_at_level(pyr.back(), alpha_frac, beta);
  for (int l = static_cast<int>(pyr.size()) - 2; l >= 0; --l) {
    Raster up = upsample_to(total, pyr[l].width, pyr[l].height);
    Raster phi = attenuation_at_level(pyr[l], alpha_frac, beta);
    for (std::size_t i = 0; i < up.size(); ++i) up.data[i] *= phi.data[i];
    total = std::move(up);
  }

  // Attenuated forward-difference gradient field, zero flux at the far edge.
  const int w = lum.width, hh = lum.height;
  Raster gx(w, hh), gy(w, hh);
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < w; ++x) {
      gx.at(y, x) = x + 1 < w ? (h.at(y, x + 1) - h.at(y, x)) * total.at(y, x) : 0.0f;
      gy.at(y, x) = y + 1 < hh ? (h.at(y + 1, x) - h.at(y, x)) * total.at(y, x) : 0.0f;
    }
  }

  // Divergence by backward differences; telescopes to zero total flux.
  Raster div(w, hh);
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < w; ++x) {
      const float dgx = gx.at(y, x) - (x > 0 ? gx.at(y, x - 1) : 0.0f);
      const float dgy = gy.at(y, x) - (y > 0 ? gy.at(y - 1, x) : 0.0f);
      div.at(y, x) = dgx + dgy;
    }
  }

  const Raster rebuilt = solve_poisson(div, static_cast<float>(tol), max_iters);

  Raster out(w, hh);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = static_cast<float>(std::exp(rebuilt.data[i]));
  }
  return normalize(out, {NormalizationVariant::kLinear, 1e-6f});
}

}  // namespace tonematch
