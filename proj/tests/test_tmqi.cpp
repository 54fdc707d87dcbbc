#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "tonematch/common.hpp"
#include "tonematch/image.hpp"
#include "tonematch/rng.hpp"
#include "tonematch/tmqi.hpp"

using namespace tonematch;

namespace {

Raster noise_raster(int w, int h, std::uint64_t seed, float lo, float hi) {
  Rng rng(seed);
  Raster r(w, h);
  for (float& v : r.data) v = lo + rng.uniform() * (hi - lo);
  return r;
}

}  // namespace

TEST_CASE("self-comparison has unit structural fidelity") {
  const Raster x = noise_raster(64, 48, 5, 0.0f, 1.0f);
  const TmqiReport rep = tmqi(x, x);
  CHECK(std::fabs(rep.structural - 1.0) <= 1e-9);
}

TEST_CASE("per-scale scores recombine to S") {
  const TmqiConstants k;
  const Raster hdr = noise_raster(64, 64, 9, 0.01f, 200.0f);
  const Raster ldr = noise_raster(64, 64, 10, 0.0f, 1.0f);
  std::array<double, 5> per{};
  const double s = structural_fidelity(hdr, ldr, &per, k);
  double prod = 1.0;
  for (int i = 0; i < 5; ++i) prod *= std::pow(per[i], k.scale_weights[i]);
  CHECK(std::fabs(s - prod) <= 1e-12);
}

TEST_CASE("constant rendition scores low structural fidelity") {
  const Raster hdr = noise_raster(64, 64, 11, 0.01f, 500.0f);
  const Raster flat(64, 64, 0.5f);
  const TmqiReport rep = tmqi(hdr, flat);
  CHECK(rep.structural < 0.5);
}

TEST_CASE("constant image has zero naturalness") {
  const Raster flat(48, 48, 0.4f);
  CHECK(naturalness(flat) == 0.0);
}

TEST_CASE("naturalness normalization peaks at exactly 1") {
  const TmqiConstants k;
  // Gaussian factor peaks at m = mean_mu; Beta factor at the mode of
  // Beta(p, q), scaled back by the contrast normalizer.
  const double d_mode =
      (k.beta_p - 1.0) / (k.beta_p + k.beta_q - 2.0) * k.contrast_normalizer;
  CHECK(std::fabs(naturalness_from_stats(k.mean_mu, d_mode, k) - 1.0) <= 1e-9);
  // Anywhere else it is strictly below 1.
  CHECK(naturalness_from_stats(k.mean_mu + 30.0, d_mode, k) < 1.0);
  CHECK(naturalness_from_stats(k.mean_mu, d_mode * 2.0, k) < 1.0);
}

TEST_CASE("naturalness matches a reference scalar loop") {
  const TmqiConstants k;
  const Raster x = noise_raster(64, 64, 13, 0.45f, 0.55f);

  // Reference: lift to 0-255, global mean m; d = mean of per-block sample
  // standard deviations over an 11x11 tiling (partial edge blocks keep their
  // actual support; single-sample blocks contribute 0).
  double m = 0.0;
  for (float v : x.data) m += 255.0 * v;
  m /= static_cast<double>(x.size());

  double dsum = 0.0;
  int blocks = 0;
  for (int by = 0; by < x.height; by += k.window_size) {
    for (int bx = 0; bx < x.width; bx += k.window_size) {
      const int y1 = std::min(by + k.window_size, x.height);
      const int x1 = std::min(bx + k.window_size, x.width);
      const int n = (y1 - by) * (x1 - bx);
      double s = 0.0, s2 = 0.0;
      for (int yy = by; yy < y1; ++yy)
        for (int xx = bx; xx < x1; ++xx) {
          const double v = 255.0 * x.at(yy, xx);
          s += v;
          s2 += v * v;
        }
      if (n > 1) dsum += std::sqrt(std::max((s2 - s * s / n) / (n - 1), 0.0));
      ++blocks;
    }
  }
  const double d = dsum / blocks;

  CHECK(std::fabs(naturalness(x, k) - naturalness_from_stats(m, d, k)) <= 1e-9);
}

TEST_CASE("score composes S and N by the pinned formula") {
  const TmqiConstants k;
  const Raster hdr = noise_raster(64, 64, 17, 0.01f, 300.0f);
  const Raster ldr = noise_raster(64, 64, 18, 0.0f, 1.0f);
  const TmqiReport rep = tmqi(hdr, ldr);
  const double want = k.a * std::pow(rep.structural, k.alpha) +
                      (1.0 - k.a) * std::pow(rep.naturalness, k.beta);
  CHECK(std::fabs(rep.score - want) <= 1e-12);
}

TEST_CASE("constant self-comparison lands exactly at the S-only score") {
  // S = 1 (identical sides), N = 0 (no contrast): Q = a.
  const TmqiConstants k;
  const Raster flat(64, 64, 0.5f);
  const TmqiReport rep = tmqi(flat, flat);
  CHECK(std::fabs(rep.structural - 1.0) <= 1e-9);
  CHECK(rep.naturalness == 0.0);
  CHECK(std::fabs(rep.score - k.a) <= 1e-9);
}

TEST_CASE("dimension gate") {
  const Raster small(16, 16, 0.5f);
  CHECK_THROWS_AS(tmqi(small, small), DataError);
  const Raster a(40, 40, 0.5f);
  const Raster b(40, 32, 0.5f);
  CHECK_THROWS_AS(tmqi(a, b), DataError);  // mismatched dims
}
