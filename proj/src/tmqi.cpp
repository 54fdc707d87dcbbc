// Tone-mapped image quality index: multi-scale structural fidelity with a
// visibility-mapped deviation term, combined with a statistical naturalness
// density over global mean and mean local contrast.

#include <algorithm>
#include <cmath>
#include <vector>

#include "tonematch/tmqi.hpp"

namespace tonematch {

namespace {

double gaussian_cdf(double z) { return 0.5 * std::erfc(-z / 1.4142135623730951); }

double gaussian_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * 2.5066282746310002);
}

double beta_pdf(double x, double p, double q) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  const double log_b = std::lgamma(p) + std::lgamma(q) - std::lgamma(p + q);
  return std::exp((p - 1.0) * std::log(x) + (q - 1.0) * std::log1p(-x) - log_b);
}

// Maximize f over [lo, hi]: coarse grid then ternary refinement. The pdfs
// involved are unimodal, so this lands on the global maximum.
template <typename F>
double maximize(F f, double lo, double hi) {
  const int grid = 512;
  double best_x = lo, best = f(lo);
  for (int i = 1; i <= grid; ++i) {
    const double x = lo + (hi - lo) * i / grid;
    const double v = f(x);
    if (v > best) { best = v; best_x = x; }
  }
  double a = std::max(lo, best_x - (hi - lo) / grid);
  double b = std::min(hi, best_x + (hi - lo) / grid);
  for (int it = 0; it < 200; ++it) {
    const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
    if (f(m1) < f(m2)) a = m1; else b = m2;
  }
  return f(0.5 * (a + b));
}

// 2x2 mean pooling; odd trailing row/column dropped.
Raster half(const Raster& in) {
  const int ow = in.width / 2, oh = in.height / 2;
  Raster out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      out.at(y, x) = 0.25f * (in.at(2 * y, 2 * x) + in.at(2 * y, 2 * x + 1) +
                              in.at(2 * y + 1, 2 * x) + in.at(2 * y + 1, 2 * x + 1));
    }
  }
  return out;
}

struct Window {
  std::vector<double> weights;  // window_size^2, normalized over full support
  int radius;
};

Window make_window(int size, double sigma) {
  Window w;
  w.radius = size / 2;
  w.weights.resize(static_cast<std::size_t>(size) * size);
  double total = 0.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dy = y - w.radius, dx = x - w.radius;
      const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      w.weights[static_cast<std::size_t>(y) * size + x] = g;
      total += g;
    }
  }
  for (double& v : w.weights) v /= total;
  return w;
}

// Mean local-term value at one scale. Windows are clipped at borders and
// their Gaussian weights renormalized over the clipped support, so every
// pixel contributes even on levels smaller than the window.
double scale_score(const Raster& x, const Raster& y, const Window& win,
                   const TmqiConstants& k) {
  const int size = 2 * win.radius + 1;
  const double tau = k.tau;
  const double tau_scale = tau / 3.0;
  double acc = 0.0;
  for (int py = 0; py < x.height; ++py) {
    for (int px = 0; px < x.width; ++px) {
      const int y0 = std::max(0, py - win.radius), y1 = std::min(x.height - 1, py + win.radius);
      const int x0 = std::max(0, px - win.radius), x1 = std::min(x.width - 1, px + win.radius);
      double wsum = 0.0, mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
      for (int yy = y0; yy <= y1; ++yy) {
        for (int xx = x0; xx <= x1; ++xx) {
          const double w =
              win.weights[static_cast<std::size_t>(yy - py + win.radius) * size +
                          (xx - px + win.radius)];
          const double a = x.at(yy, xx);
          const double b = y.at(yy, xx);
          wsum += w;
          mx += w * a;
          my += w * b;
          mxx += w * a * a;
          myy += w * b * b;
          mxy += w * a * b;
        }
      }
      mx /= wsum;
      my /= wsum;
      const double vx = std::max(mxx / wsum - mx * mx, 0.0);
      const double vy = std::max(myy / wsum - my * my, 0.0);
      const double sx = std::sqrt(vx);
      const double sy = std::sqrt(vy);
      const double sxy = mxy / wsum - mx * my;
      const double sx_t = gaussian_cdf((sx - tau) / tau_scale);
      const double sy_t = gaussian_cdf((sy - tau) / tau_scale);
      const double term1 = (2.0 * sx_t * sy_t + k.c1) / (sx_t * sx_t + sy_t * sy_t + k.c1);
      const double term2 = (sxy + k.c2) / (sx * sy + k.c2);
      acc += term1 * term2;
    }
  }
  return acc / (static_cast<double>(x.width) * x.height);
}

void check_pair(const Raster& hdr, const Raster& ldr, const char* what) {
  if (!hdr.same_shape(ldr)) {
    throw DataError(std::string(what) + ": rasters must share dimensions");
  }
  if (std::min(hdr.width, hdr.height) < 32) {
    throw DataError(std::string(what) + ": minimum dimension is 32 (got " +
                    std::to_string(std::min(hdr.width, hdr.height)) + ")");
  }
}

// Lift both sides onto the 0-255 value scale. The display side is linear;
// the scene side is log min-max normalized unless already display-referred
// (max <= 1), which keeps self-comparison an identity.
Raster hdr_side_255(const Raster& hdr) {
  float hi = hdr.data.empty() ? 0.0f : hdr.data[0];
  float lo = hi;
  for (float v : hdr.data) {
    if (!std::isfinite(v) || v < 0.0f) {
      throw DataError("structural_fidelity: scene raster must be finite and >= 0");
    }
    hi = std::max(hi, v);
    lo = std::min(lo, v);
  }
  Raster out(hdr.width, hdr.height);
  if (hi <= 1.0f) {
    for (std::size_t i = 0; i < hdr.size(); ++i) out.data[i] = hdr.data[i] * 255.0f;
    return out;
  }
  out = normalize(hdr, {NormalizationVariant::kLog, 1e-6f});
  for (float& v : out.data) v *= 255.0f;
  return out;
}

Raster ldr_side_255(const Raster& ldr, const char* what) {
  Raster out(ldr.width, ldr.height);
  for (std::size_t i = 0; i < ldr.size(); ++i) {
    const float v = ldr.data[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw DataError(std::string(what) + ": display raster outside [0,1] at pixel " +
                      std::to_string(i));
    }
    out.data[i] = v * 255.0f;
  }
  return out;
}

}  // namespace

double structural_fidelity(const Raster& hdr_lum, const Raster& ldr_lum,
                           std::array<double, 5>* per_scale, const TmqiConstants& k) {
  check_pair(hdr_lum, ldr_lum, "structural_fidelity");
  Raster x = hdr_side_255(hdr_lum);
  Raster y = ldr_side_255(ldr_lum, "structural_fidelity");
  const Window win = make_window(k.window_size, k.window_sigma);

  std::array<double, 5> scores{};
  double s = 1.0;
  for (int level = 0; level < 5; ++level) {
    if (level > 0) {
      x = half(x);
      y = half(y);
    }
    const double raw = scale_score(x, y, win, k);
    scores[level] = std::clamp(raw, 0.0, 1.0);
    s *= std::pow(scores[level], k.scale_weights[level]);
  }
  if (per_scale) *per_scale = scores;
  return std::clamp(s, 0.0, 1.0);
}

double naturalness_from_stats(double m, double d, const TmqiConstants& k) {
  const double pm = gaussian_pdf(m, k.mean_mu, k.mean_sigma);
  const double pd = beta_pdf(d / k.contrast_normalizer, k.beta_p, k.beta_q);
  // Normalizer: the largest attainable product. The factors are independent,
  // so each is maximized on its own; recomputed only when constants change.
  thread_local TmqiConstants cached{};
  thread_local double cached_norm = -1.0;
  auto same = [](const TmqiConstants& a, const TmqiConstants& b) {
    return a.mean_mu == b.mean_mu && a.mean_sigma == b.mean_sigma &&
           a.beta_p == b.beta_p && a.beta_q == b.beta_q &&
           a.contrast_normalizer == b.contrast_normalizer;
  };
  if (cached_norm < 0.0 || !same(cached, k)) {
    const double max_pm =
        maximize([&](double v) { return gaussian_pdf(v, k.mean_mu, k.mean_sigma); }, 0.0, 255.0);
    const double max_pd = maximize(
        [&](double v) { return beta_pdf(v / k.contrast_normalizer, k.beta_p, k.beta_q); }, 0.0,
        k.contrast_normalizer);
    cached = k;
    cached_norm = max_pm * max_pd;
  }
  return std::clamp(pm * pd / cached_norm, 0.0, 1.0);
}

double naturalness(const Raster& ldr_lum, const TmqiConstants& k) {
  if (ldr_lum.width <= 0 || ldr_lum.height <= 0) {
    throw DataError("naturalness: empty raster");
  }
  const Raster y = ldr_side_255(ldr_lum, "naturalness");

  double mean = 0.0;
  for (float v : y.data) mean += v;
  mean /= static_cast<double>(y.size());

  // Mean of per-block sample standard deviations over an 11x11 tiling;
  // partial edge blocks use their actual support, 1-sample blocks count as 0.
  const int bs = k.window_size;
  double dsum = 0.0;
  int blocks = 0;
  for (int by = 0; by < y.height; by += bs) {
    for (int bx = 0; bx < y.width; bx += bs) {
      const int y1 = std::min(by + bs, y.height), x1 = std::min(bx + bs, y.width);
      const int n = (y1 - by) * (x1 - bx);
      double s = 0.0, s2 = 0.0;
      for (int yy = by; yy < y1; ++yy) {
        for (int xx = bx; xx < x1; ++xx) {
          const double v = y.at(yy, xx);
          s += v;
          s2 += v * v;
        }
      }
      double sd = 0.0;
      if (n > 1) {
        const double var = std::max((s2 - s * s / n) / (n - 1), 0.0);
        sd = std::sqrt(var);
      }
      dsum += sd;
      ++blocks;
    }
  }
  const double d = dsum / blocks;
  return naturalness_from_stats(mean, d, k);
}

TmqiReport tmqi(const Raster& hdr_lum, const Raster& ldr_lum, const TmqiConstants& k) {
  check_pair(hdr_lum, ldr_lum, "tmqi");
  TmqiReport r;
  r.structural = structural_fidelity(hdr_lum, ldr_lum, &r.per_scale, k);
  r.naturalness = naturalness(ldr_lum, k);
  r.score = k.a * std::pow(r.structural, k.alpha) +
            (1.0 - k.a) * std::pow(r.naturalness, k.beta);
  return r;
}

}  // namespace tonematch
