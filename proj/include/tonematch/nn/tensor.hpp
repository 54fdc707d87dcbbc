#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "tonematch/common.hpp"

namespace tonematch::nn {

struct Shape {
  int n = 1, c = 1, h = 1, w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * static_cast<std::size_t>(h) * w;
  }
  bool operator==(const Shape& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const;
};

// When enabled (the default), every op's forward output is scanned and a
// non-finite value raises NumericError naming the op. Training must fail
// loudly rather than poison checkpoints.
void set_nan_tripwire(bool on);
bool nan_tripwire();

namespace detail {

// Graph node. value is always populated; grad appears during backward.
// After a backward sweep the non-leaf plumbing (parents, backward_fn) is
// released: node values stay readable, but building new differentiable ops
// on them, or a second backward, is rejected until a fresh forward.
struct Node {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;
  bool requires_grad = false;
  bool leaf = true;
  bool released = false;
  // Exact double value for 1-element reduction results; propagated through
  // scalar add/scale so loss decompositions hold to double precision.
  double scalar64 = std::numeric_limits<double>::quiet_NaN();
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& s, bool requires_grad = false);
  static Tensor full(const Shape& s, float v, bool requires_grad = false);
  static Tensor from_values(const Shape& s, std::vector<float> v,
                            bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const;
  bool requires_grad() const;

  const std::vector<float>& values() const;
  // Leaf tensors only (parameters, inputs); mutating a graph node would
  // desynchronize recorded forward state.
  std::vector<float>& mutable_values();

  // 1-element tensors: exact double where the op computed one, else the
  // stored float.
  double scalar() const;

  bool has_grad() const;
  const std::vector<float>& grad() const;
  void zero_grad();

  // Reverse sweep from this tensor. The no-argument form requires a
  // 1-element tensor and seeds with 1. The graph is released afterwards;
  // a second backward without a fresh forward is rejected.
  void backward();
  void backward(const std::vector<float>& seed);

  // Value copy with no graph attachment.
  Tensor detach(bool requires_grad = false) const;

  // Internal graph handle (op implementations and tests).
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// --- op construction helper (shared by all op translation units) ----------
namespace detail {
Tensor make_node(const char* op, Shape shape, std::vector<float> value,
                 std::vector<std::shared_ptr<Node>> parents,
                 std::function<void(Node&)> backward_fn);
void add_grad(Node& n, const std::vector<float>& g);  // accumulate, allocate lazily
}  // namespace detail

// --- elementwise / structural ops ------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);      // same shape
Tensor add_scalar(const Tensor& a, double s);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, float slope);
Tensor tanh_t(const Tensor& a);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor avg_pool2(const Tensor& a);                 // 2x2 stride-2 mean, even dims

// --- reductions (value computed in double, kept in the scalar64 slot) ------
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor mse_to(const Tensor& a, double target);     // mean((a - target)^2)
Tensor l1_diff(const Tensor& a, const Tensor& b);  // mean |a - b|

// --- convolution family -----------------------------------------------------
enum class PadMode { kZero, kReflect };
enum class ConvPath { kAuto, kNaive, kIm2col };  // paths agree bit-for-bit

// x: (N,Ci,H,W); w: (Co,Ci,k,k); b: (Co) as shape {Co,1,1,1}.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad, PadMode mode, ConvPath path = ConvPath::kAuto);

// x: (N,Ci,H,W); w: (Ci,Co,k,k); b: (Co). Output height (H-1)*s - 2p + k +
// opad with opad = s - k + 2p, which must land in [0, s); for the 3x3
// stride-2 pad-1 case this doubles spatial dims exactly.
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b,
                        int stride, int pad);

// --- normalization ----------------------------------------------------------
// gamma, beta: shape {C,1,1,1}. instance_norm standardizes each (n,c) plane,
// batch_norm each channel over (n,h,w); both use biased variance + eps.
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     float eps = 1e-5f);
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps = 1e-5f);

}  // namespace tonematch::nn
