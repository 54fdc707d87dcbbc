#include "tonematch/nn/gradcheck.hpp"

#include <cmath>

namespace tonematch::nn {

GradCheckReport grad_check(const std::function<Tensor()>& forward_loss,
                           const std::vector<NamedParam>& params,
                           double eps, double tol) {
  if (params.empty()) throw DataError("grad_check: no parameters given");
  std::size_t total = 0;
  for (const auto& p : params) total += p.tensor.numel();
  if (total > 10000)
    throw DataError("grad_check: " + std::to_string(total) +
                    " parameters exceed the 1e4 desk-scale bound");

  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
  Tensor loss = forward_loss();
  loss.backward();
  std::vector<std::vector<float>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    analytic.push_back(p.tensor.has_grad()
                           ? p.tensor.grad()
                           : std::vector<float>(p.tensor.numel(), 0.0f));
  }

  GradCheckReport rep;
  double sum_rel = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor t = params[pi].tensor;
    auto& vals = t.mutable_values();
    std::vector<double> numeric(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const float orig = vals[i];
      const float hi = static_cast<float>(static_cast<double>(orig) + eps);
      const float lo = static_cast<float>(static_cast<double>(orig) - eps);
      vals[i] = hi;
      const double lp = forward_loss().scalar();
      vals[i] = lo;
      const double lm = forward_loss().scalar();
      vals[i] = orig;
      numeric[i] = (lp - lm) / (static_cast<double>(hi) - static_cast<double>(lo));
    }
    double max_a = 0.0, max_n = 0.0, max_diff = 0.0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      max_a = std::max(max_a, std::fabs(static_cast<double>(analytic[pi][i])));
      max_n = std::max(max_n, std::fabs(numeric[i]));
      max_diff = std::max(
          max_diff, std::fabs(static_cast<double>(analytic[pi][i]) - numeric[i]));
    }
    const double denom = std::max({max_a, max_n, 1e-12});
    const double rel = max_diff / denom;
    sum_rel += rel;
    if (rel >= rep.max_rel) {
      rep.max_rel = rel;
      rep.worst = params[pi].name;
    }
    ++rep.tensors_checked;
  }
  rep.mean_rel = sum_rel / static_cast<double>(rep.tensors_checked);
  rep.pass = rep.max_rel <= tol;
  return rep;
}

}  // namespace tonematch::nn
