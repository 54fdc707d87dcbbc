#include <cmath>
#include <vector>

#include "tonematch/nn/tensor.hpp"

namespace tonematch::nn {

using detail::add_grad;
using detail::make_node;
using detail::Node;

namespace {

// Mirror without repeating the edge sample: -1 -> 1, n -> n-2.
inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

inline std::size_t at4(const Shape& s, int n, int c, int y, int x) {
  return ((static_cast<std::size_t>(n) * s.c + c) * s.h + y) * s.w + x;
}

struct ConvGeom {
  Shape xs, ws;
  int N, CI, H, W, CO, K, S, P, OH, OW;
  PadMode mode;
};

// Padded sample fetch. Both convolution paths and all backward passes go
// through this one definition, so padding semantics cannot diverge.
inline float fetch(const std::vector<float>& xv, const ConvGeom& g, int n,
                   int ci, int iy, int ix) {
  if (g.mode == PadMode::kZero) {
    if (iy < 0 || iy >= g.H || ix < 0 || ix >= g.W) return 0.0f;
    return xv[at4(g.xs, n, ci, iy, ix)];
  }
  return xv[at4(g.xs, n, ci, reflect_index(iy, g.H), reflect_index(ix, g.W))];
}

ConvGeom conv_geometry(const Tensor& x, const Tensor& w, const Tensor& b,
                       int stride, int pad, PadMode mode) {
  ConvGeom g;
  g.xs = x.shape();
  g.ws = w.shape();
  g.mode = mode;
  g.N = g.xs.n;
  g.CI = g.xs.c;
  g.H = g.xs.h;
  g.W = g.xs.w;
  g.CO = g.ws.n;
  g.K = g.ws.h;
  g.S = stride;
  g.P = pad;
  if (g.ws.h != g.ws.w)
    throw DataError("conv2d: kernel must be square, got " + g.ws.str());
  if (g.ws.c != g.CI)
    throw DataError("conv2d: shape mismatch, expected " +
                    std::to_string(g.ws.c) + " input channels, actual " +
                    std::to_string(g.CI));
  if (b.numel() != static_cast<std::size_t>(g.CO))
    throw DataError("conv2d: shape mismatch, expected bias of " +
                    std::to_string(g.CO) + ", actual " +
                    std::to_string(b.numel()));
  if (stride < 1 || pad < 0) throw DataError("conv2d: invalid stride/pad");
  if (mode == PadMode::kReflect && (pad > g.H - 1 || pad > g.W - 1))
    throw DataError("conv2d: reflect pad " + std::to_string(pad) +
                    " too large for input " + g.xs.str());
  if (g.H + 2 * pad < g.K || g.W + 2 * pad < g.K)
    throw DataError("conv2d: kernel " + std::to_string(g.K) +
                    " larger than padded input " + g.xs.str());
  g.OH = (g.H + 2 * pad - g.K) / stride + 1;
  g.OW = (g.W + 2 * pad - g.K) / stride + 1;
  return g;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad, PadMode mode, ConvPath path) {
  const ConvGeom g = conv_geometry(x, w, b, stride, pad, mode);
  const Shape os{g.N, g.CO, g.OH, g.OW};
  const auto& xv = x.values();
  const auto& wv = w.values();
  const auto& bv = b.values();
  std::vector<float> out(os.numel());

  const int patch_len = g.CI * g.K * g.K;
  if (path == ConvPath::kAuto) path = ConvPath::kIm2col;

  if (path == ConvPath::kNaive) {
    // Accumulation order per output element: ci, then kh, then kw, in double.
    for (int n = 0; n < g.N; ++n)
      for (int co = 0; co < g.CO; ++co) {
        const float* wrow = &wv[static_cast<std::size_t>(co) * patch_len];
        for (int oy = 0; oy < g.OH; ++oy)
          for (int ox = 0; ox < g.OW; ++ox) {
            double acc = static_cast<double>(bv[co]);
            int widx = 0;
            for (int ci = 0; ci < g.CI; ++ci)
              for (int kh = 0; kh < g.K; ++kh)
                for (int kw = 0; kw < g.K; ++kw, ++widx)
                  acc += static_cast<double>(wrow[widx]) *
                         static_cast<double>(fetch(xv, g, n, ci,
                                                   oy * g.S - g.P + kh,
                                                   ox * g.S - g.P + kw));
            out[at4(os, n, co, oy, ox)] = static_cast<float>(acc);
          }
      }
  } else {
    // im2col: same fetches, same per-element accumulation order; the patch
    // matrix only restages memory, so the result is bit-identical to naive.
    std::vector<float> patches(static_cast<std::size_t>(g.OH) * g.OW * patch_len);
    for (int n = 0; n < g.N; ++n) {
      std::size_t p = 0;
      for (int oy = 0; oy < g.OH; ++oy)
        for (int ox = 0; ox < g.OW; ++ox)
          for (int ci = 0; ci < g.CI; ++ci)
            for (int kh = 0; kh < g.K; ++kh)
              for (int kw = 0; kw < g.K; ++kw)
                patches[p++] = fetch(xv, g, n, ci, oy * g.S - g.P + kh,
                                     ox * g.S - g.P + kw);
      for (int co = 0; co < g.CO; ++co) {
        const float* wrow = &wv[static_cast<std::size_t>(co) * patch_len];
        const float* pat = patches.data();
        float* orow = &out[at4(os, n, co, 0, 0)];
        for (int opix = 0; opix < g.OH * g.OW; ++opix, pat += patch_len) {
          double acc = static_cast<double>(bv[co]);
          for (int i = 0; i < patch_len; ++i)
            acc += static_cast<double>(wrow[i]) * static_cast<double>(pat[i]);
          orow[opix] = static_cast<float>(acc);
        }
      }
    }
  }

  auto px = x.node(), pw = w.node(), pb = b.node();
  return make_node(
      "conv2d", os, std::move(out), {px, pw, pb},
      [px, pw, pb, g, os, patch_len](Node& node) {
        const auto& xv = px->value;
        const auto& wv = pw->value;
        const auto& dy = node.grad;
        if (pb->requires_grad) {
          std::vector<float> db(pb->value.size());
          for (int co = 0; co < g.CO; ++co) {
            double acc = 0.0;
            for (int n = 0; n < g.N; ++n)
              for (int oy = 0; oy < g.OH; ++oy)
                for (int ox = 0; ox < g.OW; ++ox)
                  acc += dy[at4(os, n, co, oy, ox)];
            db[co] = static_cast<float>(acc);
          }
          add_grad(*pb, db);
        }
        if (pw->requires_grad) {
          std::vector<float> dw(pw->value.size());
          for (int co = 0; co < g.CO; ++co) {
            int widx = 0;
            for (int ci = 0; ci < g.CI; ++ci)
              for (int kh = 0; kh < g.K; ++kh)
                for (int kw = 0; kw < g.K; ++kw, ++widx) {
                  double acc = 0.0;
                  for (int n = 0; n < g.N; ++n)
                    for (int oy = 0; oy < g.OH; ++oy)
                      for (int ox = 0; ox < g.OW; ++ox)
                        acc += static_cast<double>(dy[at4(os, n, co, oy, ox)]) *
                               static_cast<double>(fetch(xv, g, n, ci,
                                                         oy * g.S - g.P + kh,
                                                         ox * g.S - g.P + kw));
                  dw[static_cast<std::size_t>(co) * patch_len + widx] =
                      static_cast<float>(acc);
                }
          }
          add_grad(*pw, dw);
        }
        if (px->requires_grad) {
          std::vector<double> dx(px->value.size(), 0.0);
          for (int n = 0; n < g.N; ++n)
            for (int co = 0; co < g.CO; ++co) {
              const float* wrow = &wv[static_cast<std::size_t>(co) * patch_len];
              for (int oy = 0; oy < g.OH; ++oy)
                for (int ox = 0; ox < g.OW; ++ox) {
                  const double gval = dy[at4(os, n, co, oy, ox)];
                  if (gval == 0.0) continue;
                  int widx = 0;
                  for (int ci = 0; ci < g.CI; ++ci)
                    for (int kh = 0; kh < g.K; ++kh)
                      for (int kw = 0; kw < g.K; ++kw, ++widx) {
                        int iy = oy * g.S - g.P + kh;
                        int ix = ox * g.S - g.P + kw;
                        if (g.mode == PadMode::kZero) {
                          if (iy < 0 || iy >= g.H || ix < 0 || ix >= g.W)
                            continue;
                        } else {
                          iy = reflect_index(iy, g.H);
                          ix = reflect_index(ix, g.W);
                        }
                        dx[at4(g.xs, n, ci, iy, ix)] += gval * wrow[widx];
                      }
                }
            }
          std::vector<float> dxf(dx.size());
          for (std::size_t i = 0; i < dx.size(); ++i)
            dxf[i] = static_cast<float>(dx[i]);
          add_grad(*px, dxf);
        }
      });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b,
                        int stride, int pad) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  const int N = xs.n, CI = xs.c, H = xs.h, W = xs.w;
  const int CO = ws.c, K = ws.h;
  if (ws.h != ws.w)
    throw DataError("conv_transpose2d: kernel must be square, got " + ws.str());
  if (ws.n != CI)
    throw DataError("conv_transpose2d: shape mismatch, expected " +
                    std::to_string(ws.n) + " input channels, actual " +
                    std::to_string(CI));
  if (b.numel() != static_cast<std::size_t>(CO))
    throw DataError("conv_transpose2d: shape mismatch, expected bias of " +
                    std::to_string(CO) + ", actual " + std::to_string(b.numel()));
  if (stride < 1 || pad < 0)
    throw DataError("conv_transpose2d: invalid stride/pad");
  const int opad = stride - K + 2 * pad;
  if (opad < 0 || opad >= stride)
    throw DataError("conv_transpose2d: stride " + std::to_string(stride) +
                    ", kernel " + std::to_string(K) + ", pad " +
                    std::to_string(pad) +
                    " leave the output misaligned (implied output padding " +
                    std::to_string(opad) + ")");
  const int OH = H * stride, OW = W * stride;
  const Shape os{N, CO, OH, OW};

  const auto& xv = x.values();
  const auto& wv = w.values();
  const auto& bv = b.values();
  std::vector<double> buf(os.numel());
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < CO; ++co) {
      double* plane = &buf[at4(os, n, co, 0, 0)];
      const double bias = bv[co];
      for (int i = 0; i < OH * OW; ++i) plane[i] = bias;
    }
  for (int n = 0; n < N; ++n)
    for (int ci = 0; ci < CI; ++ci)
      for (int y = 0; y < H; ++y)
        for (int xq = 0; xq < W; ++xq) {
          const double xval = xv[at4(xs, n, ci, y, xq)];
          if (xval == 0.0) continue;
          for (int co = 0; co < CO; ++co) {
            const float* wrow =
                &wv[((static_cast<std::size_t>(ci) * CO + co) * K) * K];
            for (int kh = 0; kh < K; ++kh) {
              const int oy = y * stride - pad + kh;
              if (oy < 0 || oy >= OH) continue;
              for (int kw = 0; kw < K; ++kw) {
                const int ox = xq * stride - pad + kw;
                if (ox < 0 || ox >= OW) continue;
                buf[at4(os, n, co, oy, ox)] +=
                    xval * static_cast<double>(wrow[kh * K + kw]);
              }
            }
          }
        }
  std::vector<float> out(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i)
    out[i] = static_cast<float>(buf[i]);

  auto px = x.node(), pw = w.node(), pb = b.node();
  return make_node(
      "conv_transpose2d", os, std::move(out), {px, pw, pb},
      [px, pw, pb, xs, ws, os, N, CI, CO, K, H, W, OH, OW, stride,
       pad](Node& node) {
        const auto& xv = px->value;
        const auto& wv = pw->value;
        const auto& dy = node.grad;
        if (pb->requires_grad) {
          std::vector<float> db(pb->value.size());
          for (int co = 0; co < CO; ++co) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n)
              for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox)
                  acc += dy[at4(os, n, co, oy, ox)];
            db[co] = static_cast<float>(acc);
          }
          add_grad(*pb, db);
        }
        if (pw->requires_grad) {
          std::vector<float> dw(pw->value.size());
          for (int ci = 0; ci < CI; ++ci)
            for (int co = 0; co < CO; ++co)
              for (int kh = 0; kh < K; ++kh)
                for (int kw = 0; kw < K; ++kw) {
                  double acc = 0.0;
                  for (int n = 0; n < N; ++n)
                    for (int y = 0; y < H; ++y) {
                      const int oy = y * stride - pad + kh;
                      if (oy < 0 || oy >= OH) continue;
                      for (int xq = 0; xq < W; ++xq) {
                        const int ox = xq * stride - pad + kw;
                        if (ox < 0 || ox >= OW) continue;
                        acc += static_cast<double>(xv[at4(xs, n, ci, y, xq)]) *
                               static_cast<double>(dy[at4(os, n, co, oy, ox)]);
                      }
                    }
                  dw[((static_cast<std::size_t>(ci) * CO + co) * K + kh) * K +
                     kw] = static_cast<float>(acc);
                }
          add_grad(*pw, dw);
        }
        if (px->requires_grad) {
          std::vector<float> dx(px->value.size());
          for (int n = 0; n < N; ++n)
            for (int ci = 0; ci < CI; ++ci)
              for (int y = 0; y < H; ++y)
                for (int xq = 0; xq < W; ++xq) {
                  double acc = 0.0;
                  for (int co = 0; co < CO; ++co) {
                    const float* wrow =
                        &wv[((static_cast<std::size_t>(ci) * CO + co) * K) * K];
                    for (int kh = 0; kh < K; ++kh) {
                      const int oy = y * stride - pad + kh;
                      if (oy < 0 || oy >= OH) continue;
                      for (int kw = 0; kw < K; ++kw) {
                        const int ox = xq * stride - pad + kw;
                        if (ox < 0 || ox >= OW) continue;
                        acc += static_cast<double>(wrow[kh * K + kw]) *
                               static_cast<double>(dy[at4(os, n, co, oy, ox)]);
                      }
                    }
                  }
                  dx[at4(xs, n, ci, y, xq)] = static_cast<float>(acc);
                }
          add_grad(*px, dx);
        }
      });
}

}  // namespace tonematch::nn
