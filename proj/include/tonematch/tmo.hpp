#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tonematch/image.hpp"

namespace tonematch {

// Declaration order doubles as the deterministic tie-break order when
// ranking operators by score.
enum class TmoId {
  kGamma,
  kLog,
  kWard,
  kTumblin,
  kSchlick,
  kDrago,
  kReinhardGlobal,
  kDurand,
  kFattal,
};

std::vector<TmoId> all_tmo_ids();
const char* tmo_name(TmoId id);
std::optional<TmoId> tmo_from_name(const std::string& name);

// Operator parameters: a keyed scalar map merged over the per-operator
// defaults. Unknown keys and non-finite values are rejected at apply time.
struct TmoParams {
  std::map<std::string, double> values;

  TmoParams() = default;
  TmoParams(std::initializer_list<std::pair<const std::string, double>> init)
      : values(init) {}

  double get(const std::string& key, double fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }
  void set(const std::string& key, double v) { values[key] = v; }
};

TmoParams tmo_defaults(TmoId id);

// Frozen parameter table, one line per operator, for reproducibility dumps.
std::string describe_tmos();

// Tone-map a luminance plane to [0, 1]. Zeros in the input are lifted to
// 1e-9 before any operator math; negative or non-finite samples are
// rejected. Output is finite and inside [0, 1] for every operator.
Raster apply_tmo(TmoId id, const TmoParams& params, const Raster& hdr_lum);

// Luminance pipeline + saturation-controlled color transfer in one call.
LdrImage apply_tmo_color(TmoId id, const TmoParams& params, const HdrImage& hdr,
                         float saturation);

// Brute-force bilateral filter, window truncated at 3*sigma_s.
// As sigma_r -> inf this degenerates to a plain truncated Gaussian blur.
Raster bilateral_filter(const Raster& in, float sigma_s, float sigma_r);

// Solve laplacian(I) = divergence under homogeneous Neumann boundaries with
// damped Jacobi sweeps (omega = 0.8) until max-norm residual <= tol, at most
// max_iters sweeps; NumericError on non-convergence. The mean of the RHS is
// subtracted first (the compatibility condition; flux-form divergences are
// zero-mean up to rounding) and the solution is gauged to zero mean.
Raster solve_poisson(const Raster& divergence, float tol, int max_iters);

}  // namespace tonematch
