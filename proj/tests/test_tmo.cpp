#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "tonematch/common.hpp"
#include "tonematch/image.hpp"
#include "tonematch/rng.hpp"
#include "tonematch/tmo.hpp"

using namespace tonematch;

namespace {

Raster random_raster(int w, int h, std::uint64_t seed, float lo = 0.01f,
                     float hi = 50.0f) {
  Rng rng(seed);
  Raster r(w, h);
  for (float& v : r.data) v = lo + rng.uniform() * (hi - lo);
  return r;
}

}  // namespace

TEST_CASE("operator name round trip and describe") {
  for (TmoId id : all_tmo_ids()) {
    const auto back = tmo_from_name(tmo_name(id));
    REQUIRE(back.has_value());
    CHECK(*back == id);
  }
  CHECK(!tmo_from_name("nonsense").has_value());
  const std::string desc = describe_tmos();
  CHECK(desc.find("reinhard") != std::string::npos);
  CHECK(desc.find("sigma_r") != std::string::npos);
}

TEST_CASE("gamma anchor") {
  // Values {0,1,4} normalize to {0,0.25,1}; display exponent 1/gamma with
  // gamma=2 gives sqrt: 0.25 -> 0.5.
  Raster r(3, 1);
  r.data = {0.0f, 1.0f, 4.0f};
  TmoParams p;
  p.set("gamma", 2.0);
  const Raster out = apply_tmo(TmoId::kGamma, p, r);
  CHECK(out.data[0] == doctest::Approx(0.0).epsilon(1e-4));
  CHECK(out.data[1] == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(out.data[2] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("log anchor: max maps to 1, constant raster stays flat") {
  Raster flat(4, 4, 7.0f);
  TmoParams p;
  p.set("k", 1.0);
  const Raster out = apply_tmo(TmoId::kLog, p, flat);
  for (float v : out.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("reinhard matches the scalar formula oracle") {
  const Raster lum = random_raster(4, 4, 77);
  TmoParams p;  // defaults: key 0.18, delta 1e-6, auto white point
  const Raster out = apply_tmo(TmoId::kReinhardGlobal, p, lum);

  // Scalar reference: s = key / exp(mean ln(L+delta)); auto Lwhite = max(L)*s;
  // Ld = s*L * (1 + s*L/Lwhite^2) / (1 + s*L).
  double acc = 0.0;
  for (float v : lum.data) acc += std::log(v + 1e-6);
  const double s = 0.18 / std::exp(acc / double(lum.size()));
  const double lwhite = double(*std::max_element(lum.data.begin(), lum.data.end())) * s;
  for (std::size_t i = 0; i < lum.size(); ++i) {
    const double ls = lum.data[i] * s;
    const double ld = std::clamp(ls * (1.0 + ls / (lwhite * lwhite)) / (1.0 + ls), 0.0, 1.0);
    CHECK(std::fabs(out.data[i] - ld) <= 1e-6);
  }
}

TEST_CASE("apply_tmo_color equals manual composition") {
  Rng rng(5);
  HdrImage hdr(8, 8, 3);
  for (float& v : hdr.data) v = rng.uniform() * 20.0f + 0.01f;
  const LdrImage got = apply_tmo_color(TmoId::kReinhardGlobal, {}, hdr, 1.0f);
  const Raster mapped = apply_tmo(TmoId::kReinhardGlobal, {}, luminance(hdr));
  const LdrImage want = correct_color(hdr, mapped, 1.0f);
  CHECK(got.data == want.data);
}

TEST_CASE("achromatic input stays achromatic for every operator") {
  Rng rng(6);
  HdrImage hdr(16, 16, 3);
  for (std::size_t px = 0; px < hdr.pixel_count(); ++px) {
    const float v = rng.uniform() * 10.0f + 0.01f;
    for (int c = 0; c < 3; ++c) hdr.data[px * 3 + c] = v;
  }
  for (TmoId id : all_tmo_ids()) {
    TmoParams p = tmo_defaults(id);
    if (id == TmoId::kFattal) p.set("max_iters", 20000.0);
    const LdrImage out = apply_tmo_color(id, p, hdr, 1.0f);
    for (std::size_t px = 0; px < out.pixel_count(); ++px) {
      CHECK(std::fabs(out.data[px * 3] - out.data[px * 3 + 1]) <= 1e-5f);
      CHECK(std::fabs(out.data[px * 3] - out.data[px * 3 + 2]) <= 1e-5f);
    }
  }
}

TEST_CASE("saturation zero yields gray renditions") {
  Rng rng(8);
  HdrImage hdr(8, 8, 3);
  for (float& v : hdr.data) v = rng.uniform() * 4.0f + 0.1f;
  const LdrImage out = apply_tmo_color(TmoId::kDrago, {}, hdr, 0.0f);
  for (std::size_t px = 0; px < out.pixel_count(); ++px) {
    CHECK(out.data[px * 3] == out.data[px * 3 + 1]);
    CHECK(out.data[px * 3] == out.data[px * 3 + 2]);
  }
}

TEST_CASE("global operators are monotone") {
  const TmoId globals[] = {TmoId::kGamma,   TmoId::kLog,     TmoId::kWard,
                           TmoId::kTumblin, TmoId::kSchlick, TmoId::kDrago};
  const Raster lum = random_raster(64, 64, 99);
  Rng probe(100);
  for (TmoId id : globals) {
    const Raster out = apply_tmo(id, {}, lum);
    for (int k = 0; k < 2000; ++k) {
      const std::size_t i = probe.uniform_u32(static_cast<std::uint32_t>(lum.size()));
      const std::size_t j = probe.uniform_u32(static_cast<std::uint32_t>(lum.size()));
      if (lum.data[i] < lum.data[j]) {
        CHECK(out.data[i] <= out.data[j] + 1e-6f);
      }
    }
  }
}

TEST_CASE("unknown parameter rejected") {
  Raster r = random_raster(4, 4, 1);
  TmoParams p;
  p.set("bogus", 1.0);
  CHECK_THROWS_AS(apply_tmo(TmoId::kGamma, p, r), DataError);
}

TEST_CASE("negative luminance rejected") {
  Raster r(2, 2, 1.0f);
  r.data[3] = -1.0f;
  CHECK_THROWS_AS(apply_tmo(TmoId::kGamma, {}, r), DataError);
}

TEST_CASE("poisson: quadratic field recovered up to a constant") {
  // u(x,y) = x^2 + y^2 on a 16x16 grid; build its discrete Neumann Laplacian
  // and solve; the solution must match u - mean(u).
  const int n = 16;
  Raster u(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) u.at(y, x) = float(x * x + y * y) / float(n * n);

  Raster div(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double nb = 0.0;
      int deg = 0;
      if (y > 0) { nb += u.at(y - 1, x); ++deg; }
      if (y < n - 1) { nb += u.at(y + 1, x); ++deg; }
      if (x > 0) { nb += u.at(y, x - 1); ++deg; }
      if (x < n - 1) { nb += u.at(y, x + 1); ++deg; }
      div.at(y, x) = static_cast<float>(nb - deg * u.at(y, x));
    }

  const Raster sol = solve_poisson(div, 1e-6, 200000);
  double mean_u = 0.0;
  for (float v : u.data) mean_u += v;
  mean_u /= u.size();
  for (std::size_t i = 0; i < u.size(); ++i) {
    CHECK(std::fabs(sol.data[i] - (u.data[i] - mean_u)) <= 1e-4);
  }
}

TEST_CASE("poisson: zero divergence gives the zero solution") {
  const Raster sol = solve_poisson(Raster(8, 8, 0.0f), 1e-8, 1000);
  for (float v : sol.data) CHECK(std::fabs(v) <= 1e-8f);
}

TEST_CASE("poisson: residual bound on a random instance") {
  Rng rng(123);
  const int n = 16;
  Raster div(n, n);
  double mean = 0.0;
  for (float& v : div.data) { v = rng.uniform() * 2.0f - 1.0f; mean += v; }
  mean /= div.size();
  for (float& v : div.data) v = static_cast<float>(v - mean);  // compatible RHS

  const double tol = 1e-4;
  const Raster sol = solve_poisson(div, tol, 200000);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double nb = 0.0;
      int deg = 0;
      if (y > 0) { nb += sol.at(y - 1, x); ++deg; }
      if (y < n - 1) { nb += sol.at(y + 1, x); ++deg; }
      if (x > 0) { nb += sol.at(y, x - 1); ++deg; }
      if (x < n - 1) { nb += sol.at(y, x + 1); ++deg; }
      CHECK(std::fabs(nb - deg * sol.at(y, x) - div.at(y, x)) <= tol + 1e-5);
    }
}

TEST_CASE("bilateral filter with huge range sigma degenerates to gaussian") {
  Rng rng(31);
  Raster in(16, 16);
  for (float& v : in.data) v = rng.uniform();
  const float sigma_s = 1.5f;
  const Raster got = bilateral_filter(in, sigma_s, 1e9f);

  // Truncated Gaussian reference: radius ceil(3*sigma), window clamped at the
  // borders, normalized over the visited taps.
  const int radius = static_cast<int>(std::ceil(3.0f * sigma_s));
  const double inv = 1.0 / (2.0 * sigma_s * sigma_s);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double num = 0.0, den = 0.0;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= in.height || xx < 0 || xx >= in.width) continue;
          const double w = std::exp(-(double(dy) * dy + double(dx) * dx) * inv);
          num += w * in.at(yy, xx);
          den += w;
        }
      CHECK(std::fabs(got.at(y, x) - num / den) <= 1e-4);
    }
}

TEST_CASE("every operator maps a real scene into [0,1]") {
  Rng rng(777);
  Raster lum(32, 32);
  for (float& v : lum.data) v = std::exp((rng.uniform() * 2.0f - 1.0f) * 4.0f);
  for (TmoId id : all_tmo_ids()) {
    const Raster out = apply_tmo(id, {}, lum);
    REQUIRE(out.width == 32);
    REQUIRE(out.height == 32);
    for (float v : out.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}
