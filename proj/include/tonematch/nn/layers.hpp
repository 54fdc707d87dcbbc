#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tonematch/nn/tensor.hpp"
#include "tonematch/rng.hpp"

namespace tonematch::nn {

enum class NormKind { kInstance, kBatch };

struct NamedParam {
  std::string name;
  Tensor tensor;
};

class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor forward(const Tensor& x) = 0;
  // Appends (prefix + local suffix, tensor) for every trainable parameter,
  // in a fixed order (checkpoint layout and init draw order both rely on it).
  virtual void collect(const std::string& prefix,
                       std::vector<NamedParam>& out) const {
    (void)prefix;
    (void)out;
  }
};

class Conv2d : public Module {
 public:
  Conv2d(int in_c, int out_c, int k, int stride, int pad, PadMode mode);
  Tensor forward(const Tensor& x) override;
  void collect(const std::string& prefix,
               std::vector<NamedParam>& out) const override;

  Tensor weight, bias;  // (out,in,k,k), (out)
  int stride, pad;
  PadMode mode;
};

class ConvTranspose2d : public Module {
 public:
  ConvTranspose2d(int in_c, int out_c, int k, int stride, int pad);
  Tensor forward(const Tensor& x) override;
  void collect(const std::string& prefix,
               std::vector<NamedParam>& out) const override;

  Tensor weight, bias;  // (in,out,k,k), (out)
  int stride, pad;
};

class InstanceNorm2d : public Module {
 public:
  explicit InstanceNorm2d(int c);
  Tensor forward(const Tensor& x) override;
  void collect(const std::string& prefix,
               std::vector<NamedParam>& out) const override;

  Tensor gamma, beta;
};

class BatchNorm2d : public Module {
 public:
  explicit BatchNorm2d(int c);
  Tensor forward(const Tensor& x) override;
  void collect(const std::string& prefix,
               std::vector<NamedParam>& out) const override;

  Tensor gamma, beta;
};

std::unique_ptr<Module> make_norm(NormKind kind, int c);

class ReLULayer : public Module {
 public:
  Tensor forward(const Tensor& x) override { return relu(x); }
};

class LeakyReLULayer : public Module {
 public:
  explicit LeakyReLULayer(float slope) : slope_(slope) {}
  Tensor forward(const Tensor& x) override { return leaky_relu(x, slope_); }

 private:
  float slope_;
};

class TanhLayer : public Module {
 public:
  Tensor forward(const Tensor& x) override { return tanh_t(x); }
};

// x + conv2(norm(relu(conv1(x)))); both convs 3x3 stride-1 reflect-padded,
// channel count preserved.
class ResidualBlock : public Module {
 public:
  ResidualBlock(int c, NormKind norm);
  Tensor forward(const Tensor& x) override;
  void collect(const std::string& prefix,
               std::vector<NamedParam>& out) const override;

 private:
  Conv2d conv1_, conv2_;
  std::unique_ptr<Module> norm_;
};

// Ordered (name, module) chain.
class Sequential : public Module {
 public:
  template <class T, class... Args>
  T* emplace(const std::string& name, Args&&... args) {
    auto m = std::make_unique<T>(std::forward<Args>(args)...);
    T* raw = m.get();
    layers_.emplace_back(name, std::move(m));
    return raw;
  }

  Module* emplace_named(const std::string& name, std::unique_ptr<Module> m) {
    Module* raw = m.get();
    layers_.emplace_back(name, std::move(m));
    return raw;
  }

  Tensor forward(const Tensor& x) override;
  void collect(const std::string& prefix,
               std::vector<NamedParam>& out) const override;
  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Module>>> layers_;
};

// Draws every parameter from one seeded stream, in collection order:
// *.weight ~ N(0, 0.02^2), *.gamma ~ N(1, 0.02^2), *.bias and *.beta zero.
void init_weights(const Module& m, std::uint64_t seed);
void init_weights(const std::vector<NamedParam>& params, std::uint64_t seed);

std::size_t parameter_count(const Module& m);

}  // namespace tonematch::nn
