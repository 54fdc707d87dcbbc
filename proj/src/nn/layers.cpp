#include "tonematch/nn/layers.hpp"

namespace tonematch::nn {

Conv2d::Conv2d(int in_c, int out_c, int k, int stride_, int pad_, PadMode mode_)
    : weight(Tensor::zeros(Shape{out_c, in_c, k, k}, true)),
      bias(Tensor::zeros(Shape{out_c, 1, 1, 1}, true)),
      stride(stride_),
      pad(pad_),
      mode(mode_) {
  if (in_c < 1 || out_c < 1 || k < 1)
    throw DataError("Conv2d: invalid channel/kernel configuration");
}

Tensor Conv2d::forward(const Tensor& x) {
  return conv2d(x, weight, bias, stride, pad, mode);
}

void Conv2d::collect(const std::string& prefix,
                     std::vector<NamedParam>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

ConvTranspose2d::ConvTranspose2d(int in_c, int out_c, int k, int stride_,
                                 int pad_)
    : weight(Tensor::zeros(Shape{in_c, out_c, k, k}, true)),
      bias(Tensor::zeros(Shape{out_c, 1, 1, 1}, true)),
      stride(stride_),
      pad(pad_) {
  if (in_c < 1 || out_c < 1 || k < 1)
    throw DataError("ConvTranspose2d: invalid channel/kernel configuration");
}

Tensor ConvTranspose2d::forward(const Tensor& x) {
  return conv_transpose2d(x, weight, bias, stride, pad);
}

void ConvTranspose2d::collect(const std::string& prefix,
                              std::vector<NamedParam>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

InstanceNorm2d::InstanceNorm2d(int c)
    : gamma(Tensor::full(Shape{c, 1, 1, 1}, 1.0f, true)),
      beta(Tensor::zeros(Shape{c, 1, 1, 1}, true)) {}

Tensor InstanceNorm2d::forward(const Tensor& x) {
  return instance_norm(x, gamma, beta);
}

void InstanceNorm2d::collect(const std::string& prefix,
                             std::vector<NamedParam>& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

BatchNorm2d::BatchNorm2d(int c)
    : gamma(Tensor::full(Shape{c, 1, 1, 1}, 1.0f, true)),
      beta(Tensor::zeros(Shape{c, 1, 1, 1}, true)) {}

Tensor BatchNorm2d::forward(const Tensor& x) {
  return batch_norm(x, gamma, beta);
}

void BatchNorm2d::collect(const std::string& prefix,
                          std::vector<NamedParam>& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

std::unique_ptr<Module> make_norm(NormKind kind, int c) {
  if (kind == NormKind::kBatch) return std::make_unique<BatchNorm2d>(c);
  return std::make_unique<InstanceNorm2d>(c);
}

ResidualBlock::ResidualBlock(int c, NormKind norm)
    : conv1_(c, c, 3, 1, 1, PadMode::kReflect),
      conv2_(c, c, 3, 1, 1, PadMode::kReflect),
      norm_(make_norm(norm, c)) {}

Tensor ResidualBlock::forward(const Tensor& x) {
  return add(x, conv2_.forward(norm_->forward(relu(conv1_.forward(x)))));
}

void ResidualBlock::collect(const std::string& prefix,
                            std::vector<NamedParam>& out) const {
  conv1_.collect(prefix + ".conv1", out);
  norm_->collect(prefix + ".norm", out);
  conv2_.collect(prefix + ".conv2", out);
}

Tensor Sequential::forward(const Tensor& x) {
  Tensor t = x;
  for (auto& [name, m] : layers_) t = m->forward(t);
  return t;
}

void Sequential::collect(const std::string& prefix,
                         std::vector<NamedParam>& out) const {
  for (const auto& [name, m] : layers_)
    m->collect(prefix.empty() ? name : prefix + "." + name, out);
}

namespace {

std::string suffix_of(const std::string& name) {
  const auto pos = name.rfind('.');
  return pos == std::string::npos ? name : name.substr(pos + 1);
}

}  // namespace

void init_weights(const std::vector<NamedParam>& params, std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& p : params) {
    const std::string kind = suffix_of(p.name);
    Tensor t = p.tensor;
    auto& v = t.mutable_values();
    if (kind == "weight") {
      for (auto& e : v) e = rng.normal(0.0f, 0.02f);
    } else if (kind == "gamma") {
      for (auto& e : v) e = rng.normal(1.0f, 0.02f);
    } else if (kind == "bias" || kind == "beta") {
      for (auto& e : v) e = 0.0f;
    } else {
      throw DataError("init_weights: unrecognized parameter kind '" + p.name +
                      "'");
    }
  }
}

void init_weights(const Module& m, std::uint64_t seed) {
  std::vector<NamedParam> params;
  m.collect("", params);
  init_weights(params, seed);
}

std::size_t parameter_count(const Module& m) {
  std::vector<NamedParam> params;
  m.collect("", params);
  std::size_t total = 0;
  for (const auto& p : params) total += p.tensor.numel();
  return total;
}

}  // namespace tonematch::nn
