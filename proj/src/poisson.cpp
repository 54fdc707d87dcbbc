// Damped Jacobi solver for the 5-point Laplacian with homogeneous Neumann
// boundaries (mirrored stencil: lap(p) = sum over valid 4-neighbours of
// (I(q) - I(p))). Plain Jacobi stalls on the checkerboard mode, hence the
// damping.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tonematch/tmo.hpp"

namespace tonematch {

namespace {

constexpr double kOmega = 0.8;

}  // namespace

Raster solve_poisson(const Raster& divergence, float tol, int max_iters) {
  if (divergence.width < 2 || divergence.height < 2) {
    throw DataError("solve_poisson: grid must be at least 2x2");
  }
  if (!(tol > 0.0f) || max_iters < 1) {
    throw DataError("solve_poisson: tol must be > 0 and max_iters >= 1");
  }
  const int w = divergence.width, h = divergence.height;
  const std::size_t n = divergence.size();

  // Compatibility: project the RHS onto zero mean (Neumann Laplacians
  // annihilate constants, so sum(div) must vanish for a solution to exist).
  double mean = 0.0;
  for (float v : divergence.data) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = divergence.data[i] - mean;

  std::vector<double> u(n, 0.0), next(n);
  auto idx = [w](int y, int x) { return static_cast<std::size_t>(y) * w + x; };

  // Each pass measures the residual of the current iterate and prepares the
  // damped update; the iterate that satisfies the tolerance is returned as-is.
  int sweeps = 0;
  while (true) {
    double residual = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = idx(y, x);
        double nb = 0.0;
        int deg = 0;
        if (y > 0) { nb += u[i - w]; ++deg; }
        if (y < h - 1) { nb += u[i + w]; ++deg; }
        if (x > 0) { nb += u[i - 1]; ++deg; }
        if (x < w - 1) { nb += u[i + 1]; ++deg; }
        residual = std::max(residual, std::fabs(nb - deg * u[i] - f[i]));
        next[i] = (1.0 - kOmega) * u[i] + kOmega * (nb - f[i]) / deg;
      }
    }
    if (residual <= tol) break;
    if (sweeps >= max_iters) {
      throw NumericError("solve_poisson: no convergence after " + std::to_string(max_iters) +
                         " sweeps (residual " + std::to_string(residual) + ", tol " +
                         std::to_string(tol) + ")");
    }
    u.swap(next);
    ++sweeps;
  }

  double gauge = 0.0;
  for (std::size_t i = 0; i < n; ++i) gauge += u[i];
  gauge /= static_cast<double>(n);

  Raster out(w, h);
  for (std::size_t i = 0; i < n; ++i) {
    out.data[i] = static_cast<float>(u[i] - gauge);
  }
  return out;
}

}  // namespace tonematch
