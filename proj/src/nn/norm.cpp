#include <cmath>
#include <vector>

#include "tonematch/nn/tensor.hpp"

namespace tonematch::nn {

using detail::add_grad;
using detail::make_node;
using detail::Node;

namespace {

void check_affine(const char* op, const Tensor& x, const Tensor& gamma,
                  const Tensor& beta) {
  const int C = x.shape().c;
  if (gamma.numel() != static_cast<std::size_t>(C) ||
      beta.numel() != static_cast<std::size_t>(C))
    throw DataError(std::string(op) + ": shape mismatch, expected " +
                    std::to_string(C) + " affine parameters, actual gamma " +
                    std::to_string(gamma.numel()) + " / beta " +
                    std::to_string(beta.numel()));
}

// One normalization group: a contiguous run is not guaranteed, so the group
// is described by (base index, count, stride pattern) via an index list.
// Instance groups are (n,c) planes (contiguous); batch groups are channels
// across images (strided). Both share this kernel.
struct Group {
  std::vector<std::size_t> idx;
};

// Standardize x over each group, then y = gamma[c]*xhat + beta[c].
// Backward uses the exact formula:
//   dxhat = dy*gamma
//   dx = (dxhat - mean(dxhat) - xhat*mean(dxhat*xhat)) / std
Tensor norm_impl(const char* op, const Tensor& x, const Tensor& gamma,
                 const Tensor& beta, float eps,
                 std::vector<Group> groups, std::vector<int> group_channel) {
  const auto& xv = x.values();
  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  std::vector<float> out(xv.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& ix = groups[gi].idx;
    const double m = static_cast<double>(ix.size());
    double mu = 0.0;
    for (std::size_t k : ix) mu += xv[k];
    mu /= m;
    double var = 0.0;
    for (std::size_t k : ix) {
      const double d = xv[k] - mu;
      var += d * d;
    }
    var /= m;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    const double ga = gv[group_channel[gi]];
    const double be = bv[group_channel[gi]];
    for (std::size_t k : ix)
      out[k] = static_cast<float>((xv[k] - mu) * inv_std * ga + be);
  }

  auto px = x.node(), pg = gamma.node(), pb = beta.node();
  return make_node(
      op, x.shape(), std::move(out), {px, pg, pb},
      [px, pg, pb, eps, groups = std::move(groups),
       group_channel = std::move(group_channel)](Node& node) {
        const auto& xv = px->value;
        const auto& gv = pg->value;
        const auto& dy = node.grad;
        std::vector<float> dx(px->requires_grad ? xv.size() : 0, 0.0f);
        std::vector<double> dgamma(pg->requires_grad ? pg->value.size() : 0, 0.0);
        std::vector<double> dbeta(pb->requires_grad ? pb->value.size() : 0, 0.0);
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
          const auto& ix = groups[gi].idx;
          const double m = static_cast<double>(ix.size());
          double mu = 0.0;
          for (std::size_t k : ix) mu += xv[k];
          mu /= m;
          double var = 0.0;
          for (std::size_t k : ix) {
            const double d = xv[k] - mu;
            var += d * d;
          }
          var /= m;
          const double inv_std = 1.0 / std::sqrt(var + eps);
          const int c = group_channel[gi];
          const double ga = gv[c];

          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t k : ix) {
            const double xhat = (xv[k] - mu) * inv_std;
            sum_dy += dy[k];
            sum_dy_xhat += dy[k] * xhat;
          }
          if (!dbeta.empty()) dbeta[c] += sum_dy;
          if (!dgamma.empty()) dgamma[c] += sum_dy_xhat;
          if (!dx.empty()) {
            const double mean_dy = sum_dy / m;
            const double mean_dy_xhat = sum_dy_xhat / m;
            for (std::size_t k : ix) {
              const double xhat = (xv[k] - mu) * inv_std;
              dx[k] = static_cast<float>(
                  ga * inv_std * (dy[k] - mean_dy - xhat * mean_dy_xhat));
            }
          }
        }
        if (!dx.empty()) add_grad(*px, dx);
        if (!dgamma.empty()) {
          std::vector<float> g(dgamma.size());
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = static_cast<float>(dgamma[i]);
          add_grad(*pg, g);
        }
        if (!dbeta.empty()) {
          std::vector<float> g(dbeta.size());
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = static_cast<float>(dbeta[i]);
          add_grad(*pb, g);
        }
      });
}

}  // namespace

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     float eps) {
  check_affine("instance_norm", x, gamma, beta);
  const Shape s = x.shape();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  std::vector<Group> groups;
  std::vector<int> chan;
  groups.reserve(static_cast<std::size_t>(s.n) * s.c);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      Group g;
      g.idx.resize(plane);
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) g.idx[i] = base + i;
      groups.push_back(std::move(g));
      chan.push_back(c);
    }
  return norm_impl("instance_norm", x, gamma, beta, eps, std::move(groups),
                   std::move(chan));
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps) {
  check_affine("batch_norm", x, gamma, beta);
  const Shape s = x.shape();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  std::vector<Group> groups;
  std::vector<int> chan;
  groups.reserve(s.c);
  for (int c = 0; c < s.c; ++c) {
    Group g;
    g.idx.reserve(static_cast<std::size_t>(s.n) * plane);
    for (int n = 0; n < s.n; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) g.idx.push_back(base + i);
    }
    groups.push_back(std::move(g));
    chan.push_back(c);
  }
  return norm_impl("batch_norm", x, gamma, beta, eps, std::move(groups),
                   std::move(chan));
}

}  // namespace tonematch::nn
