#include "tonematch/nn/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

namespace tonematch::nn {

using detail::Node;

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
         std::to_string(h) + "," + std::to_string(w) + ")";
}

namespace {
std::atomic<bool> g_tripwire{true};
}

void set_nan_tripwire(bool on) { g_tripwire.store(on); }
bool nan_tripwire() { return g_tripwire.load(); }

// ---------------------------------------------------------------------------

namespace detail {

void add_grad(Node& n, const std::vector<float>& g) {
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0f);
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

Tensor make_node(const char* op, Shape shape, std::vector<float> value,
                 std::vector<std::shared_ptr<Node>> parents,
                 std::function<void(Node&)> backward_fn) {
  if (value.size() != shape.numel())
    throw DataError(std::string(op) + ": value size " +
                    std::to_string(value.size()) + " != shape " + shape.str());
  bool rg = false;
  for (const auto& p : parents) {
    if (p->released)
      throw DataError(std::string(op) +
                      ": input graph was already released by backward(); "
                      "re-run forward or detach first");
    rg = rg || p->requires_grad;
  }
  if (g_tripwire.load()) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (!std::isfinite(value[i]))
        throw NumericError(std::string("non-finite value out of ") + op +
                           " at flat index " + std::to_string(i));
    }
  }
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value = std::move(value);
  n->requires_grad = rg;
  n->leaf = false;
  n->op = op;
  if (rg) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

}  // namespace detail

// ---------------------------------------------------------------------------

Tensor Tensor::zeros(const Shape& s, bool requires_grad) {
  return from_values(s, std::vector<float>(s.numel(), 0.0f), requires_grad);
}

Tensor Tensor::full(const Shape& s, float v, bool requires_grad) {
  return from_values(s, std::vector<float>(s.numel(), v), requires_grad);
}

Tensor Tensor::from_values(const Shape& s, std::vector<float> v,
                           bool requires_grad) {
  if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1)
    throw DataError("tensor shape must be positive, got " + s.str());
  if (v.size() != s.numel())
    throw DataError("tensor: " + std::to_string(v.size()) +
                    " values for shape " + s.str());
  auto n = std::make_shared<Node>();
  n->shape = s;
  n->value = std::move(v);
  n->requires_grad = requires_grad;
  n->leaf = true;
  return Tensor(std::move(n));
}

static const Node& req(const std::shared_ptr<Node>& n) {
  if (!n) throw DataError("operation on an undefined tensor");
  return *n;
}

const Shape& Tensor::shape() const { return req(node_).shape; }
std::size_t Tensor::numel() const { return req(node_).value.size(); }
bool Tensor::requires_grad() const { return req(node_).requires_grad; }

const std::vector<float>& Tensor::values() const { return req(node_).value; }

std::vector<float>& Tensor::mutable_values() {
  req(node_);
  if (!node_->leaf)
    throw DataError("mutable_values: only leaf tensors may be mutated");
  return node_->value;
}

double Tensor::scalar() const {
  req(node_);
  if (node_->value.size() != 1)
    throw DataError("scalar: tensor has " + std::to_string(node_->value.size()) +
                    " elements");
  if (std::isnan(node_->scalar64) ) return static_cast<double>(node_->value[0]);
  return node_->scalar64;
}

bool Tensor::has_grad() const { return !req(node_).grad.empty(); }

const std::vector<float>& Tensor::grad() const {
  req(node_);
  if (node_->grad.empty())
    throw DataError("grad: no gradient present (backward not run, or the "
                    "tensor does not require grad)");
  return node_->grad;
}

void Tensor::zero_grad() {
  req(node_);
  if (!node_->grad.empty())
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
}

Tensor Tensor::detach(bool requires_grad) const {
  req(node_);
  return from_values(node_->shape, node_->value, requires_grad);
}

// ---------------------------------------------------------------------------

void Tensor::backward() {
  req(node_);
  if (node_->value.size() != 1)
    throw DataError("backward(): tensor is not scalar; pass a seed gradient");
  backward(std::vector<float>{1.0f});
}

void Tensor::backward(const std::vector<float>& seed) {
  req(node_);
  if (node_->released)
    throw DataError("backward: graph already released by a previous backward; "
                    "re-run forward first");
  if (seed.size() != node_->value.size())
    throw DataError("backward: seed size " + std::to_string(seed.size()) +
                    " != tensor size " + std::to_string(node_->value.size()));
  if (!node_->requires_grad) return;

  // Post-order DFS (iterative); reversed it yields a topological order with
  // every node after all its consumers.
  std::vector<Node*> order;
  std::vector<std::shared_ptr<Node>> keep;  // pins visited nodes
  std::unordered_set<Node*> visited;
  struct Frame {
    std::shared_ptr<Node> node;
    std::size_t next_parent = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({node_, 0});
  visited.insert(node_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    bool descended = false;
    while (f.next_parent < f.node->parents.size()) {
      const auto& p = f.node->parents[f.next_parent++];
      if (p->requires_grad && !visited.count(p.get())) {
        visited.insert(p.get());
        stack.push_back({p, 0});
        descended = true;
        break;
      }
    }
    if (descended) continue;
    order.push_back(f.node.get());
    keep.push_back(f.node);
    stack.pop_back();
  }

  detail::add_grad(*node_, seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) {
      if (n->grad.empty()) n->grad.assign(n->value.size(), 0.0f);
      n->backward_fn(*n);
    }
  }
  // Release the swept graph: values stay readable, plumbing goes away.
  for (Node* n : order) {
    if (!n->leaf) {
      n->parents.clear();
      n->backward_fn = nullptr;
      n->grad.clear();
      n->released = true;
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise and structural ops.

using detail::add_grad;
using detail::make_node;

static void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DataError(std::string(op) + ": shape mismatch, expected " +
                    a.shape().str() + ", actual " + b.shape().str());
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<float> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  auto pa = a.node(), pb = b.node();
  Tensor t = make_node("add", a.shape(), std::move(out), {pa, pb},
                       [pa, pb](detail::Node& n) {
                         if (pa->requires_grad) add_grad(*pa, n.grad);
                         if (pb->requires_grad) add_grad(*pb, n.grad);
                       });
  if (t.numel() == 1 && !std::isnan(pa->scalar64) && !std::isnan(pb->scalar64))
    t.node()->scalar64 = pa->scalar64 + pb->scalar64;
  return t;
}

Tensor add_scalar(const Tensor& a, double s) {
  const auto& av = a.values();
  std::vector<float> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(av[i] + s);
  auto pa = a.node();
  Tensor t = make_node("add_scalar", a.shape(), std::move(out), {pa},
                       [pa](detail::Node& n) {
                         if (pa->requires_grad) add_grad(*pa, n.grad);
                       });
  if (t.numel() == 1 && !std::isnan(pa->scalar64))
    t.node()->scalar64 = pa->scalar64 + s;
  return t;
}

Tensor scale(const Tensor& a, double s) {
  const auto& av = a.values();
  std::vector<float> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(av[i] * s);
  auto pa = a.node();
  Tensor t = make_node("scale", a.shape(), std::move(out), {pa},
                       [pa, s](detail::Node& n) {
                         if (!pa->requires_grad) return;
                         std::vector<float> g(n.grad.size());
                         for (std::size_t i = 0; i < g.size(); ++i)
                           g[i] = static_cast<float>(n.grad[i] * s);
                         add_grad(*pa, g);
                       });
  if (t.numel() == 1 && !std::isnan(pa->scalar64))
    t.node()->scalar64 = pa->scalar64 * s;
  return t;
}

Tensor relu(const Tensor& a) {
  const auto& av = a.values();
  std::vector<float> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = av[i] > 0.0f ? av[i] : 0.0f;
  auto pa = a.node();
  return make_node("relu", a.shape(), std::move(out), {pa},
                   [pa](detail::Node& n) {
                     if (!pa->requires_grad) return;
                     std::vector<float> g(n.grad.size());
                     for (std::size_t i = 0; i < g.size(); ++i)
                       g[i] = pa->value[i] > 0.0f ? n.grad[i] : 0.0f;
                     add_grad(*pa, g);
                   });
}

Tensor leaky_relu(const Tensor& a, float slope) {
  const auto& av = a.values();
  std::vector<float> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = av[i] > 0.0f ? av[i] : slope * av[i];
  auto pa = a.node();
  return make_node("leaky_relu", a.shape(), std::move(out), {pa},
                   [pa, slope](detail::Node& n) {
                     if (!pa->requires_grad) return;
                     std::vector<float> g(n.grad.size());
                     for (std::size_t i = 0; i < g.size(); ++i)
                       g[i] = pa->value[i] > 0.0f ? n.grad[i] : slope * n.grad[i];
                     add_grad(*pa, g);
                   });
}

Tensor tanh_t(const Tensor& a) {
  const auto& av = a.values();
  std::vector<float> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  auto pa = a.node();
  Tensor t = make_node("tanh", a.shape(), std::move(out), {pa}, nullptr);
  if (t.requires_grad()) {
    auto self = t.node();
    self->backward_fn = [pa, self_raw = self.get()](detail::Node& n) {
      if (!pa->requires_grad) return;
      std::vector<float> g(n.grad.size());
      for (std::size_t i = 0; i < g.size(); ++i) {
        const float y = self_raw->value[i];
        g[i] = n.grad[i] * (1.0f - y * y);
      }
      add_grad(*pa, g);
    };
  }
  return t;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
    throw DataError("concat_channels: shape mismatch, expected N/H/W of " +
                    sa.str() + ", actual " + sb.str());
  Shape so{sa.n, sa.c + sb.c, sa.h, sa.w};
  const std::size_t plane = static_cast<std::size_t>(sa.h) * sa.w;
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<float> out(so.numel());
  for (int n = 0; n < sa.n; ++n) {
    std::copy(av.begin() + n * sa.c * plane, av.begin() + (n + 1) * sa.c * plane,
              out.begin() + n * so.c * plane);
    std::copy(bv.begin() + n * sb.c * plane, bv.begin() + (n + 1) * sb.c * plane,
              out.begin() + n * so.c * plane + sa.c * plane);
  }
  auto pa = a.node(), pb = b.node();
  return make_node(
      "concat_channels", so, std::move(out), {pa, pb},
      [pa, pb, sa, sb, so, plane](detail::Node& n) {
        if (pa->requires_grad) {
          std::vector<float> g(sa.numel());
          for (int i = 0; i < sa.n; ++i)
            std::copy(n.grad.begin() + i * so.c * plane,
                      n.grad.begin() + i * so.c * plane + sa.c * plane,
                      g.begin() + i * sa.c * plane);
          add_grad(*pa, g);
        }
        if (pb->requires_grad) {
          std::vector<float> g(sb.numel());
          for (int i = 0; i < sb.n; ++i)
            std::copy(n.grad.begin() + i * so.c * plane + sa.c * plane,
                      n.grad.begin() + (i + 1) * so.c * plane,
                      g.begin() + i * sb.c * plane);
          add_grad(*pb, g);
        }
      });
}

Tensor avg_pool2(const Tensor& a) {
  const Shape& s = a.shape();
  if (s.h % 2 || s.w % 2)
    throw DataError("avg_pool2: spatial dims must be even, got " + s.str());
  Shape so{s.n, s.c, s.h / 2, s.w / 2};
  const auto& av = a.values();
  std::vector<float> out(so.numel());
  auto idx = [](const Shape& sh, int n, int c, int y, int x) {
    return ((static_cast<std::size_t>(n) * sh.c + c) * sh.h + y) * sh.w + x;
  };
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < so.h; ++y)
        for (int x = 0; x < so.w; ++x)
          out[idx(so, n, c, y, x)] =
              0.25f * (av[idx(s, n, c, 2 * y, 2 * x)] +
                       av[idx(s, n, c, 2 * y, 2 * x + 1)] +
                       av[idx(s, n, c, 2 * y + 1, 2 * x)] +
                       av[idx(s, n, c, 2 * y + 1, 2 * x + 1)]);
  auto pa = a.node();
  return make_node("avg_pool2", so, std::move(out), {pa},
                   [pa, s, so, idx](detail::Node& nd) {
                     if (!pa->requires_grad) return;
                     std::vector<float> g(s.numel(), 0.0f);
                     for (int n = 0; n < s.n; ++n)
                       for (int c = 0; c < s.c; ++c)
                         for (int y = 0; y < so.h; ++y)
                           for (int x = 0; x < so.w; ++x) {
                             const float q =
                                 0.25f * nd.grad[idx(so, n, c, y, x)];
                             g[idx(s, n, c, 2 * y, 2 * x)] += q;
                             g[idx(s, n, c, 2 * y, 2 * x + 1)] += q;
                             g[idx(s, n, c, 2 * y + 1, 2 * x)] += q;
                             g[idx(s, n, c, 2 * y + 1, 2 * x + 1)] += q;
                           }
                     add_grad(*pa, g);
                   });
}

// ---------------------------------------------------------------------------
// Reductions. Values accumulate in double and land in the scalar64 slot.

static Tensor reduction_node(const char* op, double v64,
                             std::shared_ptr<Node> pa,
                             std::function<void(detail::Node&)> bw) {
  Tensor t = make_node(op, Shape{1, 1, 1, 1}, {static_cast<float>(v64)},
                       {std::move(pa)}, std::move(bw));
  t.node()->scalar64 = v64;
  return t;
}

Tensor sum_all(const Tensor& a) {
  const auto& av = a.values();
  double acc = 0.0;
  for (float v : av) acc += v;
  auto pa = a.node();
  return reduction_node("sum_all", acc, pa, [pa](detail::Node& n) {
    if (!pa->requires_grad) return;
    std::vector<float> g(pa->value.size(), n.grad[0]);
    add_grad(*pa, g);
  });
}

Tensor mean_all(const Tensor& a) {
  const auto& av = a.values();
  double acc = 0.0;
  for (float v : av) acc += v;
  const double inv = 1.0 / static_cast<double>(av.size());
  auto pa = a.node();
  return reduction_node("mean_all", acc * inv, pa, [pa, inv](detail::Node& n) {
    if (!pa->requires_grad) return;
    const float q = static_cast<float>(n.grad[0] * inv);
    std::vector<float> g(pa->value.size(), q);
    add_grad(*pa, g);
  });
}

Tensor mse_to(const Tensor& a, double target) {
  const auto& av = a.values();
  double acc = 0.0;
  for (float v : av) {
    const double d = static_cast<double>(v) - target;
    acc += d * d;
  }
  const double inv = 1.0 / static_cast<double>(av.size());
  auto pa = a.node();
  return reduction_node(
      "mse_to", acc * inv, pa, [pa, target, inv](detail::Node& n) {
        if (!pa->requires_grad) return;
        std::vector<float> g(pa->value.size());
        const double k = 2.0 * inv * n.grad[0];
        for (std::size_t i = 0; i < g.size(); ++i)
          g[i] = static_cast<float>(k * (static_cast<double>(pa->value[i]) - target));
        add_grad(*pa, g);
      });
}

Tensor l1_diff(const Tensor& a, const Tensor& b) {
  check_same_shape("l1_diff", a, b);
  const auto& av = a.values();
  const auto& bv = b.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i)
    acc += std::fabs(static_cast<double>(av[i]) - static_cast<double>(bv[i]));
  const double inv = 1.0 / static_cast<double>(av.size());
  const double v64 = acc * inv;
  auto pa = a.node(), pb = b.node();
  Tensor t = make_node(
      "l1_diff", Shape{1, 1, 1, 1}, {static_cast<float>(v64)}, {pa, pb},
      [pa, pb, inv](detail::Node& n) {
        const double k = inv * n.grad[0];
        // sign(0) = 0: the subgradient at a kink contributes nothing.
        if (pa->requires_grad) {
          std::vector<float> g(pa->value.size());
          for (std::size_t i = 0; i < g.size(); ++i) {
            const float d = pa->value[i] - pb->value[i];
            g[i] = static_cast<float>(d > 0.0f ? k : (d < 0.0f ? -k : 0.0));
          }
          add_grad(*pa, g);
        }
        if (pb->requires_grad) {
          std::vector<float> g(pb->value.size());
          for (std::size_t i = 0; i < g.size(); ++i) {
            const float d = pa->value[i] - pb->value[i];
            g[i] = static_cast<float>(d > 0.0f ? -k : (d < 0.0f ? k : 0.0));
          }
          add_grad(*pb, g);
        }
      });
  t.node()->scalar64 = v64;
  return t;
}

}  // namespace tonematch::nn
