#include "tonematch/nn/optim.hpp"

#include <cmath>

namespace tonematch::nn {

double lr_schedule(double base, int epoch, int warm, int final_epoch) {
  if (warm < 1 || final_epoch <= warm)
    throw DataError("lr_schedule: need 1 <= warm < final");
  if (epoch <= warm) return base;
  if (epoch >= final_epoch) return 0.0;
  return base * static_cast<double>(final_epoch - epoch) /
         static_cast<double>(final_epoch - warm);
}

Adam::Adam(std::vector<NamedParam> params, const AdamConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(params_[i].tensor.numel(), 0.0f);
    v_[i].assign(params_[i].tensor.numel(), 0.0f);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& t = params_[i].tensor;
    auto& vals = t.mutable_values();
    const bool has = t.has_grad();
    const std::vector<float>* g = has ? &t.grad() : nullptr;
    for (std::size_t k = 0; k < vals.size(); ++k) {
      const double gk = has ? (*g)[k] : 0.0;
      const double mk = cfg_.beta1 * m_[i][k] + (1.0 - cfg_.beta1) * gk;
      const double vk = cfg_.beta2 * v_[i][k] + (1.0 - cfg_.beta2) * gk * gk;
      m_[i][k] = static_cast<float>(mk);
      v_[i][k] = static_cast<float>(vk);
      const double mhat = mk / bc1;
      const double vhat = vk / bc2;
      vals[k] = static_cast<float>(vals[k] -
                                   cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
}

std::vector<NamedTensorData> Adam::state(const std::string& prefix) const {
  std::vector<NamedTensorData> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    NamedTensorData m;
    m.name = prefix + params_[i].name + ".m";
    m.dims = {static_cast<std::uint32_t>(m_[i].size())};
    m.values = m_[i];
    out.push_back(std::move(m));
    NamedTensorData v;
    v.name = prefix + params_[i].name + ".v";
    v.dims = {static_cast<std::uint32_t>(v_[i].size())};
    v.values = v_[i];
    out.push_back(std::move(v));
  }
  NamedTensorData step;
  step.name = prefix + "step";
  step.dims = {1};
  step.values = {static_cast<float>(t_)};
  out.push_back(std::move(step));
  return out;
}

void Adam::load_state(const std::string& prefix,
                      const std::vector<NamedTensorData>& tensors) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& m = find_tensor(tensors, prefix + params_[i].name + ".m");
    const auto& v = find_tensor(tensors, prefix + params_[i].name + ".v");
    if (m.values.size() != m_[i].size() || v.values.size() != v_[i].size())
      throw DataError("checkpoint: moment shape mismatch for '" +
                      params_[i].name + "'");
    m_[i] = m.values;
    v_[i] = v.values;
  }
  const auto& step = find_tensor(tensors, prefix + "step");
  if (step.values.size() != 1)
    throw DataError("checkpoint: bad optimizer step record");
  t_ = static_cast<std::int64_t>(step.values[0]);
}

}  // namespace tonematch::nn
