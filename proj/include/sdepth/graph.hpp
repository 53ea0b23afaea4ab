#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <tuple>
#include <utility>
#include <vector>

#include "sdepth/errors.hpp"
#include "sdepth/tensor.hpp"

namespace sdepth {

// Tape-based reverse-mode autodiff at tensor granularity. Nodes are created in
// topological order, so backward() is a single reverse sweep over the tape.
// One Graph is confined to one logical execution context.
template <typename T>
class Graph {
 public:
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  struct Node {
    Tensor<T> val;
    Tensor<T> grad;  // empty until something accumulates into it
    bool requires_grad = false;
    bool force_back = false;  // multi-output ops: run back even if this grad stays empty
    std::function<void(Graph&)> back;
  };

  bool grad_enabled() const { return grad_enabled_; }
  size_t size() const { return nodes_.size(); }

  int leaf(Tensor<T> v, bool requires_grad = false) {
    require_finite(v, "leaf");
    return push(std::move(v), grad_enabled_ && requires_grad, nullptr);
  }

  const Tensor<T>& val(int id) const { return nodes_[static_cast<size_t>(id)].val; }

  // Gradient of a node; zero-initialized on first access.
  Tensor<T>& grad(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.data.empty()) n.grad = Tensor<T>::zeros(n.val.shape);
    return n.grad;
  }

  void accum(int id, const Tensor<T>& go) {
    Tensor<T>& ga = grad(id);
    for (int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i];
  }

  bool grad_set(int id) const { return !nodes_[static_cast<size_t>(id)].grad.data.empty(); }
  bool wants_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

  void backward(int root) {
    Node& r = nodes_[static_cast<size_t>(root)];
    if (!r.requires_grad) throw DimensionError("backward: root does not require grad");
    grad(root);
    std::fill(r.grad.data.begin(), r.grad.data.end(), T(1));
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (!n.back) continue;
      if (n.grad.data.empty() && !n.force_back) continue;
      n.back(*this);
    }
  }

  // ---- elementwise ----

  int add(int a, int b) {
    const Tensor<T>&A = val(a), &B = val(b);
    if (!A.same_shape(B)) throw DimensionError("add: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor<T> out = A;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += B[i];
    return unary_or_binary(std::move(out), a, b, [a, b](Graph& g, const Tensor<T>& go) {
      if (g.wants_grad(a)) g.accum(a, go);
      if (g.wants_grad(b)) g.accum(b, go);
    });
  }

  int sub(int a, int b) {
    const Tensor<T>&A = val(a), &B = val(b);
    if (!A.same_shape(B)) throw DimensionError("sub: shape mismatch");
    Tensor<T> out = A;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] -= B[i];
    return unary_or_binary(std::move(out), a, b, [a, b](Graph& g, const Tensor<T>& go) {
      if (g.wants_grad(a)) g.accum(a, go);
      if (g.wants_grad(b)) {
        Tensor<T>& gb = g.grad(b);
        for (int64_t i = 0; i < go.numel(); ++i) gb[i] -= go[i];
      }
    });
  }

  int mul(int a, int b) {
    const Tensor<T>&A = val(a), &B = val(b);
    if (!A.same_shape(B)) throw DimensionError("mul: shape mismatch");
    Tensor<T> out = A;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= B[i];
    return unary_or_binary(std::move(out), a, b, [a, b](Graph& g, const Tensor<T>& go) {
      const Tensor<T>&A2 = g.val(a), &B2 = g.val(b);
      if (g.wants_grad(a)) {
        Tensor<T>& ga = g.grad(a);
        for (int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * B2[i];
      }
      if (g.wants_grad(b)) {
        Tensor<T>& gb = g.grad(b);
        for (int64_t i = 0; i < go.numel(); ++i) gb[i] += go[i] * A2[i];
      }
    });
  }

  int scale(int a, T s) {
    Tensor<T> out = val(a);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= s;
    return unary(std::move(out), a, [a, s](Graph& g, const Tensor<T>& go) {
      Tensor<T>& ga = g.grad(a);
      for (int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * s;
    });
  }

  int gelu(int a) {
    const T inv_sqrt2 = T(0.7071067811865475);
    Tensor<T> out = val(a);
    for (int64_t i = 0; i < out.numel(); ++i) {
      T x = out[i];
      out[i] = x * T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
    }
    return unary(std::move(out), a, [a, inv_sqrt2](Graph& g, const Tensor<T>& go) {
      const Tensor<T>& A = g.val(a);
      Tensor<T>& ga = g.grad(a);
      const T inv_sqrt2pi = T(0.3989422804014327);
      for (int64_t i = 0; i < go.numel(); ++i) {
        T x = A[i];
        T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
        T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x * x);
        ga[i] += go[i] * (cdf + x * pdf);
      }
    });
  }

  int silu(int a) {
    Tensor<T> out = val(a);
    for (int64_t i = 0; i < out.numel(); ++i) {
      T x = out[i];
      out[i] = x / (T(1) + std::exp(-x));
    }
    return unary(std::move(out), a, [a](Graph& g, const Tensor<T>& go) {
      const Tensor<T>& A = g.val(a);
      Tensor<T>& ga = g.grad(a);
      for (int64_t i = 0; i < go.numel(); ++i) {
        T s = T(1) / (T(1) + std::exp(-A[i]));
        ga[i] += go[i] * s * (T(1) + A[i] * (T(1) - s));
      }
    });
  }

  int softplus(int a) {
    Tensor<T> out = val(a);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = softplus_scalar(out[i]);
    return unary(std::move(out), a, [a](Graph& g, const Tensor<T>& go) {
      const Tensor<T>& A = g.val(a);
      Tensor<T>& ga = g.grad(a);
      for (int64_t i = 0; i < go.numel(); ++i)
        ga[i] += go[i] / (T(1) + std::exp(-A[i]));
    });
  }

  static T softplus_scalar(T x) { return x > T(20) ? x : std::log1p(std::exp(x)); }

  int exp(int a) {
    Tensor<T> out = val(a);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::exp(out[i]);
    return unary(std::move(out), a, [a](Graph& g, const Tensor<T>& go) {
      const Tensor<T>& A = g.val(a);
      Tensor<T>& ga = g.grad(a);
      for (int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * std::exp(A[i]);
    });
  }

  int reciprocal(int a) {
    Tensor<T> out = val(a);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = T(1) / out[i];
    return unary(std::move(out), a, [a](Graph& g, const Tensor<T>& go) {
      const Tensor<T>& A = g.val(a);
      Tensor<T>& ga = g.grad(a);
      for (int64_t i = 0; i < go.numel(); ++i) ga[i] -= go[i] / (A[i] * A[i]);
    });
  }

  // ---- shape manipulation ----

  int reshape(int a, std::vector<int> shape) {
    const Tensor<T>& A = val(a);
    if (Tensor<T>::count(shape) != A.numel())
      throw DimensionError("reshape: element count mismatch");
    Tensor<T> out(std::move(shape), A.data);
    return unary(std::move(out), a, [a](Graph& g, const Tensor<T>& go) {
      Tensor<T>& ga = g.grad(a);
      for (int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i];
    });
  }

  int transpose(int a) {
    const Tensor<T>& A = val(a);
    if (A.ndim() != 2) throw DimensionError("transpose: expects 2-d");
    int M = A.size(0), N = A.size(1);
    Tensor<T> out = Tensor<T>::zeros({N, M});
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < N; ++j) out.at(j, i) = A.at(i, j);
    return unary(std::move(out), a, [a, M, N](Graph& g, const Tensor<T>& go) {
      Tensor<T>& ga = g.grad(a);
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) ga.at(i, j) += go.at(j, i);
    });
  }

  int slice_cols(int a, int c0, int c1) {
    const Tensor<T>& A = val(a);
    if (A.ndim() != 2 || c0 < 0 || c1 > A.size(1) || c0 >= c1)
      throw DimensionError("slice_cols: bad range");
    int M = A.size(0), W = c1 - c0;
    Tensor<T> out = Tensor<T>::zeros({M, W});
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < W; ++j) out.at(i, j) = A.at(i, c0 + j);
    return unary(std::move(out), a, [a, c0, M, W](Graph& g, const Tensor<T>& go) {
      Tensor<T>& ga = g.grad(a);
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < W; ++j) ga.at(i, c0 + j) += go.at(i, j);
    });
  }

  int slice_rows(int a, int r0, int r1) {
    const Tensor<T>& A = val(a);
    if (A.ndim() != 2 || r0 < 0 || r1 > A.size(0) || r0 >= r1)
      throw DimensionError("slice_rows: bad range");
    int W = A.size(1), M = r1 - r0;
    Tensor<T> out = Tensor<T>::zeros({M, W});
    std::copy(A.data.begin() + static_cast<size_t>(r0) * W,
              A.data.begin() + static_cast<size_t>(r1) * W, out.data.begin());
    return unary(std::move(out), a, [a, r0, M, W](Graph& g, const Tensor<T>& go) {
      Tensor<T>& ga = g.grad(a);
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < W; ++j) ga.at(r0 + i, j) += go.at(i, j);
    });
  }

  int concat_rows(int a, int b) {
    const Tensor<T>&A = val(a), &B = val(b);
    if (A.ndim() != 2 || B.ndim() != 2 || A.size(1) != B.size(1))
      throw DimensionError("concat_rows: column mismatch");
    int Ma = A.size(0), Mb = B.size(0), W = A.size(1);
    Tensor<T> out = Tensor<T>::zeros({Ma + Mb, W});
    std::copy(A.data.begin(), A.data.end(), out.data.begin());
    std::copy(B.data.begin(), B.data.end(), out.data.begin() + A.data.size());
    return unary_or_binary(std::move(out), a, b, [a, b, Ma, Mb, W](Graph& g, const Tensor<T>& go) {
      if (g.wants_grad(a)) {
        Tensor<T>& ga = g.grad(a);
        for (int64_t i = 0; i < static_cast<int64_t>(Ma) * W; ++i) ga[i] += go[i];
      }
      if (g.wants_grad(b)) {
        Tensor<T>& gb = g.grad(b);
        for (int64_t i = 0; i < static_cast<int64_t>(Mb) * W; ++i)
          gb[i] += go[static_cast<int64_t>(Ma) * W + i];
      }
    });
  }

  // ---- linear algebra ----

  int matmul(int a, int b) {
    const Tensor<T>&A = val(a), &B = val(b);
    if (A.ndim() != 2 || B.ndim() != 2 || A.size(1) != B.size(0))
      throw DimensionError("matmul: " + A.shape_str() + " x " + B.shape_str());
    int M = A.size(0), K = A.size(1), N = B.size(1);
    Tensor<T> out = Tensor<T>::zeros({M, N});
    for (int i = 0; i < M; ++i)
      for (int k = 0; k < K; ++k) {
        T aik = A.at(i, k);
        const T* brow = &B.data[static_cast<size_t>(k) * N];
        T* orow = &out.data[static_cast<size_t>(i) * N];
        for (int j = 0; j < N; ++j) orow[j] += aik * brow[j];
      }
    return unary_or_binary(std::move(out), a, b, [a, b, M, K, N](Graph& g, const Tensor<T>& go) {
      const Tensor<T>&A2 = g.val(a), &B2 = g.val(b);
      if (g.wants_grad(a)) {
        Tensor<T>& ga = g.grad(a);
        for (int i = 0; i < M; ++i)
          for (int k = 0; k < K; ++k) {
            const T* grow = &go.data[static_cast<size_t>(i) * N];
            const T* brow = &B2.data[static_cast<size_t>(k) * N];
            T acc = 0;
            for (int j = 0; j < N; ++j) acc += grow[j] * brow[j];
            ga.at(i, k) += acc;
          }
      }
      if (g.wants_grad(b)) {
        Tensor<T>& gb = g.grad(b);
        for (int k = 0; k < K; ++k)
          for (int i = 0; i < M; ++i) {
            T aik = A2.at(i, k);
            const T* grow = &go.data[static_cast<size_t>(i) * N];
            T* gbrow = &gb.data[static_cast<size_t>(k) * N];
            for (int j = 0; j < N; ++j) gbrow[j] += aik * grow[j];
          }
      }
    });
  }

  // y = x W^T + bias, x (M,K), w (N,K), bias (N) -> (M,N)
  int linear(int x, int w, int bias) {
    const Tensor<T>&X = val(x), &W = val(w), &B = val(bias);
    if (X.ndim() != 2 || W.ndim() != 2 || X.size(1) != W.size(1) ||
        B.ndim() != 1 || B.size(0) != W.size(0))
      throw DimensionError("linear: " + X.shape_str() + " x " + W.shape_str());
    int M = X.size(0), K = X.size(1), N = W.size(0);
    Tensor<T> out = Tensor<T>::zeros({M, N});
    for (int m = 0; m < M; ++m) {
      const T* xrow = &X.data[static_cast<size_t>(m) * K];
      T* orow = &out.data[static_cast<size_t>(m) * N];
      for (int n = 0; n < N; ++n) {
        const T* wrow = &W.data[static_cast<size_t>(n) * K];
        T acc = B[n];
        for (int k = 0; k < K; ++k) acc += xrow[k] * wrow[k];
        orow[n] = acc;
      }
    }
    bool req = grad_enabled_ && (wants_grad(x) || wants_grad(w) || wants_grad(bias));
    auto back = [x, w, bias, M, K, N](Graph& g, const Tensor<T>& go) {
      const Tensor<T>&X2 = g.val(x), &W2 = g.val(w);
      if (g.wants_grad(x)) {
        Tensor<T>& gx = g.grad(x);
        for (int m = 0; m < M; ++m) {
          const T* grow = &go.data[static_cast<size_t>(m) * N];
          T* gxrow = &gx.data[static_cast<size_t>(m) * K];
          for (int n = 0; n < N; ++n) {
            T gmn = grow[n];
            const T* wrow = &W2.data[static_cast<size_t>(n) * K];
            for (int k = 0; k < K; ++k) gxrow[k] += gmn * wrow[k];
          }
        }
      }
      if (g.wants_grad(w)) {
        Tensor<T>& gw = g.grad(w);
        for (int m = 0; m < M; ++m) {
          const T* grow = &go.data[static_cast<size_t>(m) * N];
          const T* xrow = &X2.data[static_cast<size_t>(m) * K];
          for (int n = 0; n < N; ++n) {
            T gmn = grow[n];
            T* gwrow = &gw.data[static_cast<size_t>(n) * K];
            for (int k = 0; k < K; ++k) gwrow[k] += gmn * xrow[k];
          }
        }
      }
      if (g.wants_grad(bias)) {
        Tensor<T>& gb = g.grad(bias);
        for (int m = 0; m < M; ++m)
          for (int n = 0; n < N; ++n) gb[n] += go.at(m, n);
      }
    };
    return push_op(std::move(out), req, std::move(back));
  }

  // ---- conv / resize ----

  // input (Ci,H,W), kernel (Co,Ci,k,k) with odd k, bias (Co); cross-correlation.
  // Edge-replicating border pad: (C,H,W) -> (C,H+2p,W+2p). Unlike zero
  // padding this preserves spatially constant inputs exactly.
  int replicate_pad(int input, int pad) {
    const Tensor<T>& In = val(input);
    if (In.ndim() != 3) throw DimensionError("replicate_pad: expects (C,H,W)");
    if (pad < 0) throw DimensionError("replicate_pad: negative pad");
    int C = In.size(0), H = In.size(1), W = In.size(2);
    int Hp = H + 2 * pad, Wp = W + 2 * pad;
    Tensor<T> out = Tensor<T>::zeros({C, Hp, Wp});
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < Hp; ++y) {
        int sy = std::clamp(y - pad, 0, H - 1);
        for (int x = 0; x < Wp; ++x)
          out.at(c, y, x) = In.at(c, sy, std::clamp(x - pad, 0, W - 1));
      }
    bool req = grad_enabled_ && wants_grad(input);
    auto back = [input, pad, C, H, W, Hp, Wp](Graph& g, const Tensor<T>& go) {
      if (!g.wants_grad(input)) return;
      Tensor<T>& gi = g.grad(input);
      for (int c = 0; c < C; ++c)
        for (int y = 0; y < Hp; ++y) {
          int sy = std::clamp(y - pad, 0, H - 1);
          for (int x = 0; x < Wp; ++x)
            gi.at(c, sy, std::clamp(x - pad, 0, W - 1)) += go.at(c, y, x);
        }
    };
    return push_op(std::move(out), req, std::move(back));
  }

  int conv2d(int input, int kernel, int bias, int stride, int padding) {
    const Tensor<T>&In = val(input), &Kr = val(kernel), &B = val(bias);
    if (In.ndim() != 3 || Kr.ndim() != 4 || B.ndim() != 1)
      throw DimensionError("conv2d: expects (Ci,H,W), (Co,Ci,k,k), (Co)");
    int Ci = In.size(0), H = In.size(1), W = In.size(2);
    int Co = Kr.size(0), k = Kr.size(2);
    if (Kr.size(1) != Ci || Kr.size(3) != k) throw DimensionError("conv2d: kernel/input channel mismatch");
    if (k % 2 == 0) throw DimensionError("conv2d: kernel size must be odd");
    if (B.size(0) != Co) throw DimensionError("conv2d: bias size mismatch");
    if (stride < 1 || padding < 0) throw DimensionError("conv2d: bad stride/padding");
    if ((H + 2 * padding - k) % stride != 0 || (W + 2 * padding - k) % stride != 0)
      throw DimensionError("conv2d: output size not integral");
    int Ho = (H + 2 * padding - k) / stride + 1;
    int Wo = (W + 2 * padding - k) / stride + 1;
    if (Ho < 1 || Wo < 1) throw DimensionError("conv2d: empty output");

    Tensor<T> out = Tensor<T>::zeros({Co, Ho, Wo});
    for (int co = 0; co < Co; ++co) {
      T* oc = &out.data[static_cast<size_t>(co) * Ho * Wo];
      for (int64_t i = 0; i < static_cast<int64_t>(Ho) * Wo; ++i) oc[i] = B[co];
    }
    // Row-blocked loop order keeps the active input/output rows cache-hot;
    // per output element the accumulation order stays (ci, ky, kx) ascending.
    for (int oy = 0; oy < Ho; ++oy)
      for (int ci = 0; ci < Ci; ++ci)
        for (int ky = 0; ky < k; ++ky) {
          int iy = oy * stride + ky - padding;
          if (iy < 0 || iy >= H) continue;
          const T* irow = &In.data[(static_cast<size_t>(ci) * H + iy) * W];
          for (int co = 0; co < Co; ++co) {
            T* orow = &out.data[(static_cast<size_t>(co) * Ho + oy) * Wo];
            for (int kx = 0; kx < k; ++kx) {
              T wv = Kr.at(co, ci, ky, kx);
              if (wv == T(0)) continue;
              row_axpy(orow, irow, wv, W, Wo, stride, padding, kx);
            }
          }
        }
    bool req = grad_enabled_ && (wants_grad(input) || wants_grad(kernel) || wants_grad(bias));
    auto back = [input, kernel, bias, Ci, H, W, Co, k, Ho, Wo, stride, padding](
                    Graph& g, const Tensor<T>& go) {
      const Tensor<T>&In2 = g.val(input), &Kr2 = g.val(kernel);
      if (g.wants_grad(bias)) {
        Tensor<T>& gb = g.grad(bias);
        for (int co = 0; co < Co; ++co) {
          const T* gc = &go.data[static_cast<size_t>(co) * Ho * Wo];
          T acc = 0;
          for (int64_t i = 0; i < static_cast<int64_t>(Ho) * Wo; ++i) acc += gc[i];
          gb[co] += acc;
        }
      }
      if (g.wants_grad(kernel)) {
        Tensor<T>& gk = g.grad(kernel);
        for (int oy = 0; oy < Ho; ++oy)
          for (int ci = 0; ci < Ci; ++ci)
            for (int ky = 0; ky < k; ++ky) {
              int iy = oy * stride + ky - padding;
              if (iy < 0 || iy >= H) continue;
              const T* irow = &In2.data[(static_cast<size_t>(ci) * H + iy) * W];
              for (int co = 0; co < Co; ++co) {
                const T* gorow = &go.data[(static_cast<size_t>(co) * Ho + oy) * Wo];
                for (int kx = 0; kx < k; ++kx)
                  gk.at(co, ci, ky, kx) += row_dot(gorow, irow, W, Wo, stride, padding, kx);
              }
            }
      }
      if (g.wants_grad(input)) {
        Tensor<T>& gi = g.grad(input);
        for (int oy = 0; oy < Ho; ++oy)
          for (int ci = 0; ci < Ci; ++ci)
            for (int ky = 0; ky < k; ++ky) {
              int iy = oy * stride + ky - padding;
              if (iy < 0 || iy >= H) continue;
              T* girow = &gi.data[(static_cast<size_t>(ci) * H + iy) * W];
              for (int co = 0; co < Co; ++co) {
                const T* gorow = &go.data[(static_cast<size_t>(co) * Ho + oy) * Wo];
                for (int kx = 0; kx < k; ++kx) {
                  T wv = Kr2.at(co, ci, ky, kx);
                  if (wv == T(0)) continue;
                  row_scatter(girow, gorow, wv, W, Wo, stride, padding, kx);
                }
              }
            }
      }
    };
    return push_op(std::move(out), req, std::move(back));
  }

  // Half-pixel-center bilinear sampling with edge clamping; exact identity at 1:1.
  int bilinear_resize(int input, int out_h, int out_w) {
    const Tensor<T>& In = val(input);
    if (In.ndim() != 3) throw DimensionError("bilinear_resize: expects (C,H,W)");
    if (out_h < 1 || out_w < 1) throw DimensionError("bilinear_resize: bad target size");
    int C = In.size(0), H = In.size(1), W = In.size(2);
    auto coords_y = resize_coords(H, out_h);
    auto coords_x = resize_coords(W, out_w);
    Tensor<T> out = Tensor<T>::zeros({C, out_h, out_w});
    for (int c = 0; c < C; ++c) {
      const T* ic = &In.data[static_cast<size_t>(c) * H * W];
      T* oc = &out.data[static_cast<size_t>(c) * out_h * out_w];
      for (int oy = 0; oy < out_h; ++oy) {
        auto [y0, y1, fy] = coords_y[static_cast<size_t>(oy)];
        for (int ox = 0; ox < out_w; ++ox) {
          auto [x0, x1, fx] = coords_x[static_cast<size_t>(ox)];
          T v = (T(1) - fy) * ((T(1) - fx) * ic[y0 * W + x0] + fx * ic[y0 * W + x1]) +
                fy * ((T(1) - fx) * ic[y1 * W + x0] + fx * ic[y1 * W + x1]);
          oc[static_cast<size_t>(oy) * out_w + ox] = v;
        }
      }
    }
    bool req = grad_enabled_ && wants_grad(input);
    auto back = [input, C, H, W, out_h, out_w, coords_y, coords_x](Graph& g, const Tensor<T>& go) {
      Tensor<T>& gi = g.grad(input);
      for (int c = 0; c < C; ++c) {
        T* gc = &gi.data[static_cast<size_t>(c) * H * W];
        const T* oc = &go.data[static_cast<size_t>(c) * out_h * out_w];
        for (int oy = 0; oy < out_h; ++oy) {
          auto [y0, y1, fy] = coords_y[static_cast<size_t>(oy)];
          for (int ox = 0; ox < out_w; ++ox) {
            auto [x0, x1, fx] = coords_x[static_cast<size_t>(ox)];
            T gv = oc[static_cast<size_t>(oy) * out_w + ox];
            gc[y0 * W + x0] += gv * (T(1) - fy) * (T(1) - fx);
            gc[y0 * W + x1] += gv * (T(1) - fy) * fx;
            gc[y1 * W + x0] += gv * fy * (T(1) - fx);
            gc[y1 * W + x1] += gv * fy * fx;
          }
        }
      }
    };
    return push_op(std::move(out), req, std::move(back));
  }

  // ---- normalization / attention ----

  // Normalize over the last dim with population variance, then affine.
  int layer_norm(int x, int gamma, int beta, T eps = T(1e-5)) {
    const Tensor<T>&X = val(x), &G = val(gamma), &Bt = val(beta);
    if (X.ndim() < 1) throw DimensionError("layer_norm: scalar input");
    int D = X.size(X.ndim() - 1);
    if (G.ndim() != 1 || G.size(0) != D || Bt.ndim() != 1 || Bt.size(0) != D)
      throw DimensionError("layer_norm: gamma/beta size mismatch");
    if (!(eps > T(0))) throw DimensionError("layer_norm: eps must be positive");
    int64_t R = X.numel() / D;
    Tensor<T> out = X;
    auto ctx = std::make_shared<Tensor<T>>(Tensor<T>::zeros({static_cast<int>(R), 2}));  // mean, inv_std
    for (int64_t r = 0; r < R; ++r) {
      T* row = &out.data[static_cast<size_t>(r) * D];
      T mean = 0;
      for (int d = 0; d < D; ++d) mean += row[d];
      mean /= T(D);
      T var = 0;
      for (int d = 0; d < D; ++d) { T c = row[d] - mean; var += c * c; }
      var /= T(D);
      T inv_std = T(1) / std::sqrt(var + eps);
      ctx->at(static_cast<int>(r), 0) = mean;
      ctx->at(static_cast<int>(r), 1) = inv_std;
      for (int d = 0; d < D; ++d) row[d] = (row[d] - mean) * inv_std * G[d] + Bt[d];
    }
    bool req = grad_enabled_ && (wants_grad(x) || wants_grad(gamma) || wants_grad(beta));
    auto back = [x, gamma, beta, D, R, ctx](Graph& g, const Tensor<T>& go) {
      const Tensor<T>&X2 = g.val(x), &G2 = g.val(gamma);
      std::vector<T> xhat(static_cast<size_t>(D));
      for (int64_t r = 0; r < R; ++r) {
        T mean = ctx->at(static_cast<int>(r), 0), inv_std = ctx->at(static_cast<int>(r), 1);
        const T* xrow = &X2.data[static_cast<size_t>(r) * D];
        const T* grow = &go.data[static_cast<size_t>(r) * D];
        for (int d = 0; d < D; ++d) xhat[static_cast<size_t>(d)] = (xrow[d] - mean) * inv_std;
        if (g.wants_grad(gamma)) {
          Tensor<T>& gg = g.grad(gamma);
          for (int d = 0; d < D; ++d) gg[d] += grow[d] * xhat[static_cast<size_t>(d)];
        }
        if (g.wants_grad(beta)) {
          Tensor<T>& gb = g.grad(beta);
          for (int d = 0; d < D; ++d) gb[d] += grow[d];
        }
        if (g.wants_grad(x)) {
          Tensor<T>& gx = g.grad(x);
          T* gxrow = &gx.data[static_cast<size_t>(r) * D];
          T m1 = 0, m2 = 0;
          for (int d = 0; d < D; ++d) {
            T dxh = grow[d] * G2[d];
            m1 += dxh;
            m2 += dxh * xhat[static_cast<size_t>(d)];
          }
          m1 /= T(D);
          m2 /= T(D);
          for (int d = 0; d < D; ++d) {
            T dxh = grow[d] * G2[d];
            gxrow[d] += (dxh - m1 - xhat[static_cast<size_t>(d)] * m2) * inv_std;
          }
        }
      }
    };
    return push_op(std::move(out), req, std::move(back));
  }

  // Multi-head scaled dot-product attention. q (M,D), k (N,D), v (N,D).
  int attention(int q, int k, int v, int heads) {
    const Tensor<T>&Q = val(q), &K = val(k), &V = val(v);
    if (Q.ndim() != 2 || K.ndim() != 2 || V.ndim() != 2)
      throw DimensionError("attention: expects 2-d Q/K/V");
    int M = Q.size(0), D = Q.size(1), N = K.size(0);
    if (K.size(1) != D || V.size(1) != D || V.size(0) != N)
      throw DimensionError("attention: Q/K/V dim mismatch");
    if (heads < 1 || D % heads != 0) throw DimensionError("attention: D not divisible by heads");
    int dh = D / heads;
    T sc = T(1) / std::sqrt(T(dh));
    auto probs = std::make_shared<Tensor<T>>(Tensor<T>::zeros({heads, M, N}));
    Tensor<T> out = Tensor<T>::zeros({M, D});
    std::vector<T> srow(static_cast<size_t>(N));
    for (int h = 0; h < heads; ++h) {
      int ofs = h * dh;
      for (int m = 0; m < M; ++m) {
        const T* qrow = &Q.data[static_cast<size_t>(m) * D + ofs];
        T smax = -std::numeric_limits<T>::infinity();
        for (int n = 0; n < N; ++n) {
          const T* krow = &K.data[static_cast<size_t>(n) * D + ofs];
          T s = 0;
          for (int d = 0; d < dh; ++d) s += qrow[d] * krow[d];
          s *= sc;
          srow[static_cast<size_t>(n)] = s;
          smax = std::max(smax, s);
        }
        T z = 0;
        for (int n = 0; n < N; ++n) {
          T e = std::exp(srow[static_cast<size_t>(n)] - smax);
          srow[static_cast<size_t>(n)] = e;
          z += e;
        }
        T* prow = &probs->data[(static_cast<size_t>(h) * M + m) * N];
        for (int n = 0; n < N; ++n) prow[n] = srow[static_cast<size_t>(n)] / z;
        T* orow = &out.data[static_cast<size_t>(m) * D + ofs];
        for (int n = 0; n < N; ++n) {
          T p = prow[n];
          const T* vrow = &V.data[static_cast<size_t>(n) * D + ofs];
          for (int d = 0; d < dh; ++d) orow[d] += p * vrow[d];
        }
      }
    }
    bool req = grad_enabled_ && (wants_grad(q) || wants_grad(k) || wants_grad(v));
    auto back = [q, k, v, heads, M, N, D, dh, sc, probs](Graph& g, const Tensor<T>& go) {
      const Tensor<T>&Q2 = g.val(q), &K2 = g.val(k), &V2 = g.val(v);
      bool wq = g.wants_grad(q), wk = g.wants_grad(k), wv = g.wants_grad(v);
      std::vector<T> dp(static_cast<size_t>(N)), ds(static_cast<size_t>(N));
      for (int h = 0; h < heads; ++h) {
        int ofs = h * dh;
        for (int m = 0; m < M; ++m) {
          const T* grow = &go.data[static_cast<size_t>(m) * D + ofs];
          const T* prow = &probs->data[(static_cast<size_t>(h) * M + m) * N];
          if (wv) {
            Tensor<T>& gv = g.grad(v);
            for (int n = 0; n < N; ++n) {
              T p = prow[n];
              T* gvrow = &gv.data[static_cast<size_t>(n) * D + ofs];
              for (int d = 0; d < dh; ++d) gvrow[d] += p * grow[d];
            }
          }
          if (!wq && !wk) continue;
          T dot = 0;
          for (int n = 0; n < N; ++n) {
            const T* vrow = &V2.data[static_cast<size_t>(n) * D + ofs];
            T acc = 0;
            for (int d = 0; d < dh; ++d) acc += grow[d] * vrow[d];
            dp[static_cast<size_t>(n)] = acc;
            dot += acc * prow[n];
          }
          for (int n = 0; n < N; ++n)
            ds[static_cast<size_t>(n)] = prow[n] * (dp[static_cast<size_t>(n)] - dot) * sc;
          if (wq) {
            Tensor<T>& gq = g.grad(q);
            T* gqrow = &gq.data[static_cast<size_t>(m) * D + ofs];
            for (int n = 0; n < N; ++n) {
              T dsn = ds[static_cast<size_t>(n)];
              const T* krow = &K2.data[static_cast<size_t>(n) * D + ofs];
              for (int d = 0; d < dh; ++d) gqrow[d] += dsn * krow[d];
            }
          }
          if (wk) {
            Tensor<T>& gk = g.grad(k);
            const T* qrow = &Q2.data[static_cast<size_t>(m) * D + ofs];
            for (int n = 0; n < N; ++n) {
              T dsn = ds[static_cast<size_t>(n)];
              T* gkrow = &gk.data[static_cast<size_t>(n) * D + ofs];
              for (int d = 0; d < dh; ++d) gkrow[d] += dsn * qrow[d];
            }
          }
        }
      }
    };
    return push_op(std::move(out), req, std::move(back));
  }

  // ---- sequence ops ----

  // Depthwise causal conv over an already-left-padded sequence.
  // xp ((T+k-1),D), kernel (D,k), bias (D) -> y (T,D);
  // y[t,d] = sum_j kernel[d,j] * xp[t+j,d] + bias[d].
  int causal_conv1d(int xp, int kernel, int bias) {
    const Tensor<T>&X = val(xp), &Kr = val(kernel), &B = val(bias);
    if (X.ndim() != 2 || Kr.ndim() != 2 || B.ndim() != 1)
      throw DimensionError("causal_conv1d: bad ranks");
    int D = X.size(1), k = Kr.size(1);
    if (Kr.size(0) != D || B.size(0) != D) throw DimensionError("causal_conv1d: channel mismatch");
    int Tn = X.size(0) - (k - 1);
    if (Tn < 1) throw DimensionError("causal_conv1d: sequence shorter than kernel");
    Tensor<T> out = Tensor<T>::zeros({Tn, D});
    for (int t = 0; t < Tn; ++t) {
      T* orow = &out.data[static_cast<size_t>(t) * D];
      for (int j = 0; j < k; ++j) {
        const T* xrow = &X.data[static_cast<size_t>(t + j) * D];
        for (int d = 0; d < D; ++d) orow[d] += Kr.at(d, j) * xrow[d];
      }
      for (int d = 0; d < D; ++d) orow[d] += B[d];
    }
    bool req = grad_enabled_ && (wants_grad(xp) || wants_grad(kernel) || wants_grad(bias));
    auto back = [xp, kernel, bias, Tn, D, k](Graph& g, const Tensor<T>& go) {
      const Tensor<T>&X2 = g.val(xp), &Kr2 = g.val(kernel);
      if (g.wants_grad(bias)) {
        Tensor<T>& gb = g.grad(bias);
        for (int t = 0; t < Tn; ++t)
          for (int d = 0; d < D; ++d) gb[d] += go.at(t, d);
      }
      if (g.wants_grad(kernel)) {
        Tensor<T>& gk = g.grad(kernel);
        for (int t = 0; t < Tn; ++t)
          for (int j = 0; j < k; ++j)
            for (int d = 0; d < D; ++d) gk.at(d, j) += go.at(t, d) * X2.at(t + j, d);
      }
      if (g.wants_grad(xp)) {
        Tensor<T>& gx = g.grad(xp);
        for (int t = 0; t < Tn; ++t)
          for (int j = 0; j < k; ++j)
            for (int d = 0; d < D; ++d) gx.at(t + j, d) += go.at(t, d) * Kr2.at(d, j);
      }
    };
    return push_op(std::move(out), req, std::move(back));
  }

  // Selective state-space recurrence.
  //   h_t[d,n] = exp(delta_t[d] * a[d,n]) * h_{t-1}[d,n] + delta_t[d] * b_t[n] * x_t[d]
  //   y_t[d]   = sum_n c_t[n] * h_t[d,n] + dskip[d] * x_t[d]
  // delta (T,D), a (D,N), b (T,N), c (T,N), x (T,D), dskip (D), hin (D,N).
  // Returns {y (T,D), h_out (D,N)}; strictly causal.
  std::pair<int, int> ssm_scan(int delta, int a, int b, int c, int x, int dskip, int hin) {
    const Tensor<T>&Dl = val(delta), &A = val(a), &Bm = val(b), &Cm = val(c), &X = val(x),
        &Ds = val(dskip), &H0 = val(hin);
    if (Dl.ndim() != 2 || X.ndim() != 2 || !Dl.same_shape(X))
      throw DimensionError("ssm_scan: delta/x shape mismatch");
    int Tn = X.size(0), D = X.size(1);
    if (A.ndim() != 2 || A.size(0) != D) throw DimensionError("ssm_scan: a shape");
    int N = A.size(1);
    if (Bm.shape != std::vector<int>{Tn, N} || Cm.shape != std::vector<int>{Tn, N})
      throw DimensionError("ssm_scan: b/c shape");
    if (Ds.shape != std::vector<int>{D}) throw DimensionError("ssm_scan: dskip shape");
    if (H0.shape != std::vector<int>{D, N}) throw DimensionError("ssm_scan: hin shape");

    // Keep every h_t for backprop-through-time.
    auto hs = std::make_shared<Tensor<T>>(Tensor<T>::zeros({Tn, D, N}));
    Tensor<T> y = Tensor<T>::zeros({Tn, D});
    {
      std::vector<T> h(H0.data.begin(), H0.data.end());
      for (int t = 0; t < Tn; ++t) {
        const T* brow = &Bm.data[static_cast<size_t>(t) * N];
        const T* crow = &Cm.data[static_cast<size_t>(t) * N];
        const T* xrow = &X.data[static_cast<size_t>(t) * D];
        const T* drow = &Dl.data[static_cast<size_t>(t) * D];
        T* yrow = &y.data[static_cast<size_t>(t) * D];
        T* hsrow = &hs->data[static_cast<size_t>(t) * D * N];
        for (int d = 0; d < D; ++d) {
          T dt = drow[d], xt = xrow[d];
          const T* arow = &A.data[static_cast<size_t>(d) * N];
          T* hrow = &h[static_cast<size_t>(d) * N];
          T acc = 0;
          for (int n = 0; n < N; ++n) {
            T hn = std::exp(dt * arow[n]) * hrow[n] + dt * brow[n] * xt;
            hrow[n] = hn;
            hsrow[static_cast<size_t>(d) * N + n] = hn;
            acc += crow[n] * hn;
          }
          yrow[d] = acc + Ds[d] * xt;
        }
      }
    }
    Tensor<T> hout({D, N}, std::vector<T>(hs->data.end() - static_cast<size_t>(D) * N, hs->data.end()));

    bool req = grad_enabled_ && (wants_grad(delta) || wants_grad(a) || wants_grad(b) ||
                                 wants_grad(c) || wants_grad(x) || wants_grad(dskip) ||
                                 wants_grad(hin));
    int yid = push(std::move(y), req, nullptr);
    int hid = push(std::move(hout), req, nullptr);
    if (req) {
      nodes_[static_cast<size_t>(yid)].force_back = true;
      nodes_[static_cast<size_t>(yid)].back =
          [delta, a, b, c, x, dskip, hin, yid, hid, Tn, D, N, hs](Graph& g) {
            bool has_gy = g.grad_set(yid), has_gh = g.grad_set(hid);
            if (!has_gy && !has_gh) return;
            const Tensor<T>&Dl2 = g.val(delta), &A2 = g.val(a), &Bm2 = g.val(b),
                &Cm2 = g.val(c), &X2 = g.val(x), &H02 = g.val(hin);
            // gh carries dL/dh_t while sweeping t backwards.
            Tensor<T> gh = has_gh ? g.grad(hid) : Tensor<T>::zeros({D, N});
            for (int t = Tn - 1; t >= 0; --t) {
              const T* gyrow = has_gy ? &g.grad(yid).data[static_cast<size_t>(t) * D] : nullptr;
              const T* brow = &Bm2.data[static_cast<size_t>(t) * N];
              const T* crow = &Cm2.data[static_cast<size_t>(t) * N];
              const T* xrow = &X2.data[static_cast<size_t>(t) * D];
              const T* drow = &Dl2.data[static_cast<size_t>(t) * D];
              const T* hsrow = &hs->data[static_cast<size_t>(t) * D * N];
              const T* hprev = t > 0 ? &hs->data[static_cast<size_t>(t - 1) * D * N] : H02.data.data();
              for (int d = 0; d < D; ++d) {
                T gyv = gyrow ? gyrow[d] : T(0);
                T dt = drow[d], xt = xrow[d];
                const T* arow = &A2.data[static_cast<size_t>(d) * N];
                T* ghrow = &gh.data[static_cast<size_t>(d) * N];
                const T* hrow = &hsrow[static_cast<size_t>(d) * N];
                const T* hprow = &hprev[static_cast<size_t>(d) * N];
                if (gyv != T(0)) {
                  if (g.wants_grad(dskip)) g.grad(dskip)[d] += gyv * xt;
                  if (g.wants_grad(x)) g.grad(x).at(t, d) += gyv * Ds_at(g, dskip, d);
                  if (g.wants_grad(c)) {
                    Tensor<T>& gc = g.grad(c);
                    for (int n = 0; n < N; ++n) gc.at(t, n) += gyv * hrow[n];
                  }
                  for (int n = 0; n < N; ++n) ghrow[n] += gyv * crow[n];
                }
                T gdelta_d = 0;
                for (int n = 0; n < N; ++n) {
                  T ghn = ghrow[n];
                  if (ghn == T(0)) continue;
                  T ebar = std::exp(dt * arow[n]);
                  if (g.wants_grad(a)) g.grad(a).at(d, n) += ghn * dt * ebar * hprow[n];
                  gdelta_d += ghn * (arow[n] * ebar * hprow[n] + brow[n] * xt);
                  if (g.wants_grad(b)) g.grad(b).at(t, n) += ghn * dt * xt;
                  if (g.wants_grad(x)) g.grad(x).at(t, d) += ghn * dt * brow[n];
                  // propagate to h_{t-1}
                  ghrow[n] = ghn * ebar;
                }
                if (g.wants_grad(delta)) g.grad(delta).at(t, d) += gdelta_d;
              }
            }
            if (g.wants_grad(hin)) {
              Tensor<T>& gh0 = g.grad(hin);
              for (int64_t i = 0; i < gh.numel(); ++i) gh0[i] += gh[i];
            }
          };
    }
    return {yid, hid};
  }

  // Non-overlapping patch extraction: img (C,H,W) -> (Gh*Gw, C*p*p).
  int patch_gather(int img, int patch) {
    const Tensor<T>& I = val(img);
    if (I.ndim() != 3) throw DimensionError("patch_gather: expects (C,H,W)");
    int C = I.size(0), H = I.size(1), W = I.size(2);
    if (patch < 1 || H % patch != 0 || W % patch != 0)
      throw DimensionError("patch_gather: image sides " + I.shape_str() +
                           " not divisible by patch " + std::to_string(patch));
    int Gh = H / patch, Gw = W / patch, pp = patch * patch;
    Tensor<T> out = Tensor<T>::zeros({Gh * Gw, C * pp});
    for (int gy = 0; gy < Gh; ++gy)
      for (int gx = 0; gx < Gw; ++gx) {
        T* row = &out.data[static_cast<size_t>(gy * Gw + gx) * C * pp];
        for (int c = 0; c < C; ++c)
          for (int py = 0; py < patch; ++py)
            for (int px = 0; px < patch; ++px)
              row[(c * patch + py) * patch + px] = I.at(c, gy * patch + py, gx * patch + px);
      }
    bool req = grad_enabled_ && wants_grad(img);
    auto back = [img, C, patch, Gh, Gw, pp](Graph& g, const Tensor<T>& go) {
      Tensor<T>& gi = g.grad(img);
      for (int gy = 0; gy < Gh; ++gy)
        for (int gx = 0; gx < Gw; ++gx) {
          const T* row = &go.data[static_cast<size_t>(gy * Gw + gx) * C * pp];
          for (int c = 0; c < C; ++c)
            for (int py = 0; py < patch; ++py)
              for (int px = 0; px < patch; ++px)
                gi.at(c, gy * patch + py, gx * patch + px) += row[(c * patch + py) * patch + px];
        }
    };
    return push_op(std::move(out), req, std::move(back));
  }

  // ---- reductions / losses ----

  int mean_all(int a) {
    const Tensor<T>& A = val(a);
    T m = 0;
    for (int64_t i = 0; i < A.numel(); ++i) m += A[i];
    int64_t n = A.numel();
    m /= T(n);
    Tensor<T> out({1}, {m});
    return unary(std::move(out), a, [a, n](Graph& g, const Tensor<T>& go) {
      Tensor<T>& ga = g.grad(a);
      T gv = go[0] / T(n);
      for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += gv;
    });
  }

  // Mean L1 against a constant target over a validity mask. Returns scalar (1,).
  int masked_l1(int pred, const Tensor<T>& target, const Mask& mask) {
    const Tensor<T>& P = val(pred);
    if (P.shape != target.shape) throw DimensionError("masked_l1: pred/target shape mismatch");
    if (mask.shape != P.shape) throw DimensionError("masked_l1: mask shape mismatch");
    int64_t cnt = 0;
    double acc = 0;
    for (int64_t i = 0; i < P.numel(); ++i)
      if (mask[i]) {
        acc += std::abs(static_cast<double>(P[i]) - static_cast<double>(target[i]));
        ++cnt;
      }
    if (cnt == 0) throw MetricError("masked_l1: empty validity mask");
    Tensor<T> out({1}, {static_cast<T>(acc / static_cast<double>(cnt))});
    auto tgt = std::make_shared<Tensor<T>>(target);
    auto msk = std::make_shared<Mask>(mask);
    return unary(std::move(out), pred, [pred, tgt, msk, cnt](Graph& g, const Tensor<T>& go) {
      const Tensor<T>& P2 = g.val(pred);
      Tensor<T>& gp = g.grad(pred);
      T gv = go[0] / T(cnt);
      for (int64_t i = 0; i < P2.numel(); ++i) {
        if (!(*msk)[i]) continue;
        T d = P2[i] - (*tgt)[i];
        gp[i] += d > T(0) ? gv : (d < T(0) ? -gv : T(0));
      }
    });
  }

 private:
  std::deque<Node> nodes_;  // deque: growing the graph never invalidates value references
  bool grad_enabled_;

  static T Ds_at(Graph& g, int dskip, int d) { return g.val(dskip)[d]; }

  int push(Tensor<T> v, bool req, std::function<void(Graph&)> back) {
    require_finite(v, "op output");
    nodes_.push_back(Node{std::move(v), Tensor<T>{}, req, false, std::move(back)});
    return static_cast<int>(nodes_.size()) - 1;
  }

  int push_op(Tensor<T> v, bool req, std::function<void(Graph&, const Tensor<T>&)> back) {
    int id = push(std::move(v), req, nullptr);
    if (req)
      nodes_[static_cast<size_t>(id)].back = [id, back = std::move(back)](Graph& g) {
        back(g, g.grad(id));
      };
    return id;
  }

  int unary(Tensor<T> v, int a, std::function<void(Graph&, const Tensor<T>&)> back) {
    bool req = grad_enabled_ && wants_grad(a);
    return push_op(std::move(v), req, std::move(back));
  }

  int unary_or_binary(Tensor<T> v, int a, int b,
                      std::function<void(Graph&, const Tensor<T>&)> back) {
    bool req = grad_enabled_ && (wants_grad(a) || wants_grad(b));
    return push_op(std::move(v), req, std::move(back));
  }

  // Valid output-column range for a kernel column kx: ix = ox*s + kx - p in [0, W).
  static std::pair<int, int> conv_col_range(int W, int Wo, int s, int p, int kx) {
    return {std::max(0, (p - kx + s - 1) / s), std::min(Wo - 1, (W - 1 - kx + p) / s)};
  }

  // orow[ox] += w * irow[ox*s + kx - p]
  static void row_axpy(T* orow, const T* irow, T w, int W, int Wo, int s, int p, int kx) {
    auto [ox0, ox1] = conv_col_range(W, Wo, s, p, kx);
    if (s == 1) {
      const T* ip = irow + (ox0 + kx - p);
      for (int ox = ox0; ox <= ox1; ++ox) orow[ox] += w * ip[ox - ox0];
    } else {
      for (int ox = ox0; ox <= ox1; ++ox) orow[ox] += w * irow[ox * s + kx - p];
    }
  }

  // irow[ox*s + kx - p] += w * gorow[ox]  (transpose of row_axpy)
  static void row_scatter(T* irow, const T* gorow, T w, int W, int Wo, int s, int p, int kx) {
    auto [ox0, ox1] = conv_col_range(W, Wo, s, p, kx);
    if (s == 1) {
      T* ip = irow + (ox0 + kx - p);
      for (int ox = ox0; ox <= ox1; ++ox) ip[ox - ox0] += w * gorow[ox];
    } else {
      for (int ox = ox0; ox <= ox1; ++ox) irow[ox * s + kx - p] += w * gorow[ox];
    }
  }

  // sum over ox of gorow[ox] * irow[ox*s + kx - p]
  static T row_dot(const T* gorow, const T* irow, int W, int Wo, int s, int p, int kx) {
    auto [ox0, ox1] = conv_col_range(W, Wo, s, p, kx);
    T acc = 0;
    if (s == 1) {
      const T* ip = irow + (ox0 + kx - p);
      for (int ox = ox0; ox <= ox1; ++ox) acc += gorow[ox] * ip[ox - ox0];
    } else {
      for (int ox = ox0; ox <= ox1; ++ox) acc += gorow[ox] * irow[ox * s + kx - p];
    }
    return acc;
  }

  static std::vector<std::tuple<int, int, T>> resize_coords(int in, int out) {
    std::vector<std::tuple<int, int, T>> c(static_cast<size_t>(out));
    double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (int o = 0; o < out; ++o) {
      double src = (o + 0.5) * ratio - 0.5;
      if (src < 0) src = 0;
      if (src > in - 1) src = in - 1;
      int lo = static_cast<int>(std::floor(src));
      int hi = std::min(lo + 1, in - 1);
      c[static_cast<size_t>(o)] = {lo, hi, static_cast<T>(src - lo)};
    }
    return c;
  }
};

using GraphF = Graph<float>;
using GraphD = Graph<double>;

}  // namespace sdepth
