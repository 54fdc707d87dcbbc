#pragma once

#include <array>

#include "tonematch/image.hpp"

namespace tonematch {

// Every constant of the quality index in one place so experiments can swap
// them without touching the math.
struct TmqiConstants {
  // Final combination Q = a*S^alpha + (1-a)*N^beta.
  double a = 0.8012;
  double alpha = 0.3046;
  double beta = 0.7088;

  // Per-scale weights for the five dyadic scales of structural fidelity.
  std::array<double, 5> scale_weights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

  // Local window for the per-pixel statistics.
  int window_size = 11;
  double window_sigma = 1.5;

  // Visibility threshold (0-255 value scale) for the deviation mapping
  // sigma~ = Phi((sigma - tau)/(tau/3)), held fixed at every level.
  double tau = 2.0;

  // Stabilizers of the two local-term factors.
  double c1 = 0.01;
  double c2 = 10.0;

  // Naturalness: Gaussian pdf over the image mean, Beta pdf over the mean
  // local contrast (divided by contrast_normalizer), product scaled by its
  // maximum attainable value.
  double mean_mu = 115.94;
  double mean_sigma = 27.99;
  double beta_p = 4.4;
  double beta_q = 10.1;
  double contrast_normalizer = 64.29;
};

struct TmqiReport {
  double structural = 0.0;           // S in [0, 1]
  double naturalness = 0.0;          // N in [0, 1]
  double score = 0.0;                // Q in [0, 1]
  std::array<double, 5> per_scale{}; // clamped per-scale fidelity scores
};

// Multi-scale structural fidelity between a scene-referred luminance plane
// and a display-referred one. Both sides are lifted onto the 0-255 value
// scale first: the LDR side linearly; the HDR side via log min-max
// normalization unless it is already display-referred (max <= 1), in which
// case it is scaled linearly so that self-comparison is exact.
// Preconditions: same dimensions, min(width, height) >= 32.
// Returns S = prod(scale_score_i ^ weight_i) and the per-scale scores.
double structural_fidelity(const Raster& hdr_lum, const Raster& ldr_lum,
                           std::array<double, 5>* per_scale = nullptr,
                           const TmqiConstants& k = {});

// Statistical naturalness of the LDR alone (values in [0, 1]).
double naturalness(const Raster& ldr_lum, const TmqiConstants& k = {});

// The naturalness density evaluated at precomputed statistics: image mean m
// (0-255 scale) and mean local contrast d. Exposed so the normalization can
// be probed directly (m = mean_mu, d at the Beta mode gives exactly 1).
double naturalness_from_stats(double m, double d, const TmqiConstants& k = {});

TmqiReport tmqi(const Raster& hdr_lum, const Raster& ldr_lum,
                const TmqiConstants& k = {});

}  // namespace tonematch
