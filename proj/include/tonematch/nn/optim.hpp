#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tonematch/nn/checkpoint.hpp"
#include "tonematch/nn/layers.hpp"

namespace tonematch::nn {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Constant at `base` through epoch `warm`, then linear decay hitting exactly
// zero at epoch `final_epoch` (epochs are 1-based).
double lr_schedule(double base, int epoch, int warm, int final_epoch);

// Standard Adam with bias correction. Parameters with no gradient buffer are
// treated as zero-gradient (their moments stay put if they were zero, so a
// frozen parameter never moves).
class Adam {
 public:
  Adam(std::vector<NamedParam> params, const AdamConfig& cfg);

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  std::int64_t step_count() const { return t_; }

  void zero_grad();
  void step();

  // Moment buffers + step counter as checkpoint tensors named
  // <prefix><param>.m / .v and <prefix>step.
  std::vector<NamedTensorData> state(const std::string& prefix) const;
  void load_state(const std::string& prefix,
                  const std::vector<NamedTensorData>& tensors);

 private:
  std::vector<NamedParam> params_;
  std::vector<std::vector<float>> m_, v_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace tonematch::nn
