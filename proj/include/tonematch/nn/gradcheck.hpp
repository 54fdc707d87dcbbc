#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tonematch/nn/layers.hpp"

namespace tonematch::nn {

struct GradCheckReport {
  double max_rel = 0.0;   // worst per-tensor relative error
  double mean_rel = 0.0;  // mean over checked tensors
  int tensors_checked = 0;
  bool pass = false;
  std::string worst;  // name of the tensor at max_rel
};

// Central-difference check. forward_loss must rebuild the graph and return
// the scalar loss on every call. For each tensor, analytic gradients from one
// backward are compared against (L(p+eps) - L(p-eps)) / (actual interval);
// the tensor's error is max_i |a_i - n_i| normalized by the larger of the two
// gradients' max-norms (float gradients carry ~1e-7 relative noise, so a
// per-element ratio would blow up on near-zero entries).
GradCheckReport grad_check(const std::function<Tensor()>& forward_loss,
                           const std::vector<NamedParam>& params,
                           double eps = 1e-3, double tol = 1e-3);

}  // namespace tonematch::nn
