#pragma once

#include <optional>
#include <string>
#include <vector>

#include "svs/optim.hpp"
#include "svs/tensor.hpp"

namespace svs {

// ---------------------------------------------------------------------------
// Initialization.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> xavier_init(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  if (fan_in <= 0 || fan_out <= 0)
    throw ValueError("xavier_init: fan dimensions must be positive");
  double a = std::sqrt(6.0 / (static_cast<double>(fan_in) + fan_out));
  Tensor<T> t = Tensor<T>::zeros(std::move(shape));
  T* p = t.data();
  for (size_t i = 0; i < t.numel(); ++i)
    p[i] = static_cast<T>(rng.uniform(-a, a));
  return t;
}

// ---------------------------------------------------------------------------
// Convolutions over {channels, time}. Causal padding inserts (K-1)*dilation
// implicit zeros on the left so output frame t depends only on frames <= t;
// Same padding centers the kernel (odd K only).
// ---------------------------------------------------------------------------

enum class Pad { Causal, Same };

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w,
                 const std::optional<Tensor<T>>& bias, int dilation, Pad pad) {
  if (x.ndim() != 2 || w.ndim() != 3) throw ShapeError("conv1d: bad ranks");
  if (dilation < 1) throw ValueError("conv1d: dilation must be >= 1");
  int Cin = x.dim(0), L = x.dim(1);
  int Cout = w.dim(0), WCin = w.dim(1), K = w.dim(2);
  if (WCin != Cin) throw ShapeError("conv1d: channel mismatch");
  if (pad == Pad::Same && K % 2 == 0)
    throw ShapeError("conv1d: same padding requires odd kernel");
  if (bias && (bias->ndim() != 1 || bias->dim(0) != Cout))
    throw ShapeError("conv1d: bias shape mismatch");
  int anchor = (pad == Pad::Causal) ? K - 1 : (K - 1) / 2;

  std::vector<T> v(static_cast<size_t>(Cout) * L, T(0));
  const T* px = x.data();
  const T* pw = w.data();
  for (int o = 0; o < Cout; ++o) {
    T* yo = v.data() + static_cast<size_t>(o) * L;
    if (bias) {
      T b = bias->data()[o];
      for (int t = 0; t < L; ++t) yo[t] = b;
    }
    for (int i = 0; i < Cin; ++i) {
      const T* xi = px + static_cast<size_t>(i) * L;
      const T* wrow = pw + (static_cast<size_t>(o) * Cin + i) * K;
      for (int k = 0; k < K; ++k) {
        T wv = wrow[k];
        if (wv == T(0)) continue;
        int off = (k - anchor) * dilation;
        int t0 = std::max(0, -off), t1 = std::min(L, L - off);
        for (int t = t0; t < t1; ++t) yo[t] += wv * xi[t + off];
      }
    }
  }

  auto* nx = x.impl();
  auto* nw = w.impl();
  TensorNode<T>* nb = bias ? bias->impl() : nullptr;
  auto bp = [nx, nw, nb, Cin, Cout, L, K, dilation, anchor](TensorNode<T>& self) {
    const T* g = self.grad.data();
    if (nx->requires_grad) {
      Tensor<T>::ensure_grad(*nx);
      for (int o = 0; o < Cout; ++o) {
        const T* go = g + static_cast<size_t>(o) * L;
        for (int i = 0; i < Cin; ++i) {
          T* dxi = nx->grad.data() + static_cast<size_t>(i) * L;
          const T* wrow = nw->value.data() + (static_cast<size_t>(o) * Cin + i) * K;
          for (int k = 0; k < K; ++k) {
            T wv = wrow[k];
            if (wv == T(0)) continue;
            int off = (k - anchor) * dilation;
            int t0 = std::max(0, -off), t1 = std::min(L, L - off);
            for (int t = t0; t < t1; ++t) dxi[t + off] += wv * go[t];
          }
        }
      }
    }
    if (nw->requires_grad) {
      Tensor<T>::ensure_grad(*nw);
      for (int o = 0; o < Cout; ++o) {
        const T* go = g + static_cast<size_t>(o) * L;
        for (int i = 0; i < Cin; ++i) {
          const T* xi = nx->value.data() + static_cast<size_t>(i) * L;
          T* dwrow = nw->grad.data() + (static_cast<size_t>(o) * Cin + i) * K;
          for (int k = 0; k < K; ++k) {
            int off = (k - anchor) * dilation;
            int t0 = std::max(0, -off), t1 = std::min(L, L - off);
            T s = 0;
            for (int t = t0; t < t1; ++t) s += go[t] * xi[t + off];
            dwrow[k] += s;
          }
        }
      }
    }
    if (nb && nb->requires_grad) {
      Tensor<T>::ensure_grad(*nb);
      for (int o = 0; o < Cout; ++o) {
        const T* go = g + static_cast<size_t>(o) * L;
        T s = 0;
        for (int t = 0; t < L; ++t) s += go[t];
        nb->grad[o] += s;
      }
    }
  };
  if (bias)
    return detail::make_op<T>({Cout, L}, std::move(v), {x, w, *bias}, std::move(bp));
  return detail::make_op<T>({Cout, L}, std::move(v), {x, w}, std::move(bp));
}

// Convenience wrapper matching the causal dilated convolution contract.
template <typename T>
Tensor<T> causal_dilated_conv1d(const Tensor<T>& x, const Tensor<T>& w,
                                int dilation = 1) {
  return conv1d<T>(x, w, std::nullopt, dilation, Pad::Causal);
}

// Stride-2 transposed convolution with kernel 2: y[o, 2t+j] = sum_i w[o,i,j] x[i,t].
// Doubles the time axis exactly.
template <typename T>
Tensor<T> conv_transpose1d_x2(const Tensor<T>& x, const Tensor<T>& w,
                              const std::optional<Tensor<T>>& bias) {
  if (x.ndim() != 2 || w.ndim() != 3) throw ShapeError("conv_transpose1d_x2: bad ranks");
  int Cin = x.dim(0), L = x.dim(1);
  int Cout = w.dim(0), WCin = w.dim(1), K = w.dim(2);
  if (WCin != Cin) throw ShapeError("conv_transpose1d_x2: channel mismatch");
  if (K != 2) throw ShapeError("conv_transpose1d_x2: kernel must be 2");
  int Lo = 2 * L;
  std::vector<T> v(static_cast<size_t>(Cout) * Lo, T(0));
  const T* px = x.data();
  const T* pw = w.data();
  for (int o = 0; o < Cout; ++o) {
    T* yo = v.data() + static_cast<size_t>(o) * Lo;
    if (bias) {
      T b = bias->data()[o];
      for (int t = 0; t < Lo; ++t) yo[t] = b;
    }
    for (int i = 0; i < Cin; ++i) {
      const T* xi = px + static_cast<size_t>(i) * L;
      const T* wrow = pw + (static_cast<size_t>(o) * Cin + i) * 2;
      for (int t = 0; t < L; ++t) {
        yo[2 * t] += wrow[0] * xi[t];
        yo[2 * t + 1] += wrow[1] * xi[t];
      }
    }
  }
  auto* nx = x.impl();
  auto* nw = w.impl();
  TensorNode<T>* nb = bias ? bias->impl() : nullptr;
  auto bp = [nx, nw, nb, Cin, Cout, L, Lo](TensorNode<T>& self) {
    const T* g = self.grad.data();
    if (nx->requires_grad) {
      Tensor<T>::ensure_grad(*nx);
      for (int o = 0; o < Cout; ++o) {
        const T* go = g + static_cast<size_t>(o) * Lo;
        for (int i = 0; i < Cin; ++i) {
          T* dxi = nx->grad.data() + static_cast<size_t>(i) * L;
          const T* wrow = nw->value.data() + (static_cast<size_t>(o) * Cin + i) * 2;
          for (int t = 0; t < L; ++t)
            dxi[t] += wrow[0] * go[2 * t] + wrow[1] * go[2 * t + 1];
        }
      }
    }
    if (nw->requires_grad) {
      Tensor<T>::ensure_grad(*nw);
      for (int o = 0; o < Cout; ++o) {
        const T* go = g + static_cast<size_t>(o) * Lo;
        for (int i = 0; i < Cin; ++i) {
          const T* xi = nx->value.data() + static_cast<size_t>(i) * L;
          T s0 = 0, s1 = 0;
          for (int t = 0; t < L; ++t) {
            s0 += go[2 * t] * xi[t];
            s1 += go[2 * t + 1] * xi[t];
          }
          T* dwrow = nw->grad.data() + (static_cast<size_t>(o) * Cin + i) * 2;
          dwrow[0] += s0;
          dwrow[1] += s1;
        }
      }
    }
    if (nb && nb->requires_grad) {
      Tensor<T>::ensure_grad(*nb);
      for (int o = 0; o < Cout; ++o) {
        const T* go = g + static_cast<size_t>(o) * Lo;
        T s = 0;
        for (int t = 0; t < Lo; ++t) s += go[t];
        nb->grad[o] += s;
      }
    }
  };
  if (bias)
    return detail::make_op<T>({Cout, Lo}, std::move(v), {x, w, *bias}, std::move(bp));
  return detail::make_op<T>({Cout, Lo}, std::move(v), {x, w}, std::move(bp));
}

// 2-d convolution over {C, H, W} with explicit stride and zero padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w,
                 const std::optional<Tensor<T>>& bias, int sh, int sw, int ph,
                 int pw_) {
  if (x.ndim() != 3 || w.ndim() != 4) throw ShapeError("conv2d: bad ranks");
  int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
  int Cout = w.dim(0), WCin = w.dim(1), KH = w.dim(2), KW = w.dim(3);
  if (WCin != Cin) throw ShapeError("conv2d: channel mismatch");
  if (sh < 1 || sw < 1) throw ValueError("conv2d: stride must be >= 1");
  int Ho = (H + 2 * ph - KH) / sh + 1;
  int Wo = (W + 2 * pw_ - KW) / sw + 1;
  if (Ho < 1 || Wo < 1) throw ShapeError("conv2d: output would be empty");

  std::vector<T> v(static_cast<size_t>(Cout) * Ho * Wo, T(0));
  const T* px = x.data();
  const T* pw = w.data();
  for (int o = 0; o < Cout; ++o) {
    T* yo = v.data() + static_cast<size_t>(o) * Ho * Wo;
    if (bias) {
      T b = bias->data()[o];
      for (size_t i = 0; i < static_cast<size_t>(Ho) * Wo; ++i) yo[i] = b;
    }
    for (int i = 0; i < Cin; ++i) {
      const T* xi = px + static_cast<size_t>(i) * H * W;
      for (int kh = 0; kh < KH; ++kh)
        for (int kw = 0; kw < KW; ++kw) {
          T wv = pw[((static_cast<size_t>(o) * Cin + i) * KH + kh) * KW + kw];
          if (wv == T(0)) continue;
          for (int a = 0; a < Ho; ++a) {
            int hy = a * sh - ph + kh;
            if (hy < 0 || hy >= H) continue;
            const T* xrow = xi + static_cast<size_t>(hy) * W;
            T* yrow = yo + static_cast<size_t>(a) * Wo;
            for (int b2 = 0; b2 < Wo; ++b2) {
              int wx = b2 * sw - pw_ + kw;
              if (wx < 0 || wx >= W) continue;
              yrow[b2] += wv * xrow[wx];
            }
          }
        }
    }
  }

  auto* nx = x.impl();
  auto* nw = w.impl();
  TensorNode<T>* nb = bias ? bias->impl() : nullptr;
  auto bp = [nx, nw, nb, Cin, Cout, H, W, KH, KW, sh, sw, ph, pw_, Ho,
             Wo](TensorNode<T>& self) {
    const T* g = self.grad.data();
    if (nx->requires_grad) Tensor<T>::ensure_grad(*nx);
    if (nw->requires_grad) Tensor<T>::ensure_grad(*nw);
    for (int o = 0; o < Cout; ++o) {
      const T* go = g + static_cast<size_t>(o) * Ho * Wo;
      for (int i = 0; i < Cin; ++i) {
        const T* xi = nx->value.data() + static_cast<size_t>(i) * H * W;
        T* dxi = nx->requires_grad ? nx->grad.data() + static_cast<size_t>(i) * H * W
                                   : nullptr;
        for (int kh = 0; kh < KH; ++kh)
          for (int kw = 0; kw < KW; ++kw) {
            size_t widx = ((static_cast<size_t>(o) * Cin + i) * KH + kh) * KW + kw;
            T wv = nw->value[widx];
            T dws = 0;
            for (int a = 0; a < Ho; ++a) {
              int hy = a * sh - ph + kh;
              if (hy < 0 || hy >= H) continue;
              const T* grow = go + static_cast<size_t>(a) * Wo;
              const T* xrow = xi + static_cast<size_t>(hy) * W;
              T* dxrow = dxi ? dxi + static_cast<size_t>(hy) * W : nullptr;
              for (int b2 = 0; b2 < Wo; ++b2) {
                int wx = b2 * sw - pw_ + kw;
                if (wx < 0 || wx >= W) continue;
                if (dxi) dxrow[wx] += wv * grow[b2];
                dws += grow[b2] * xrow[wx];
              }
            }
            if (nw->requires_grad) nw->grad[widx] += dws;
          }
      }
      if (nb && nb->requires_grad) {
        Tensor<T>::ensure_grad(*nb);
        T s = 0;
        for (size_t i = 0; i < static_cast<size_t>(Ho) * Wo; ++i) s += go[i];
        nb->grad[o] += s;
      }
    }
  };
  if (bias)
    return detail::make_op<T>({Cout, Ho, Wo}, std::move(v), {x, w, *bias},
                              std::move(bp));
  return detail::make_op<T>({Cout, Ho, Wo}, std::move(v), {x, w}, std::move(bp));
}

// ---------------------------------------------------------------------------
// Embedding lookup: ids (length L) into a {vocab, dim} table -> {dim, L}.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> embedding(const std::vector<int>& ids, const Tensor<T>& table) {
  if (table.ndim() != 2) throw ShapeError("embedding: table must be 2-d");
  int V = table.dim(0), d = table.dim(1);
  int L = static_cast<int>(ids.size());
  if (L < 1) throw ShapeError("embedding: empty id sequence");
  for (int id : ids)
    if (id < 0 || id >= V)
      throw ValueError("embedding: id " + std::to_string(id) + " out of range");
  std::vector<T> v(static_cast<size_t>(d) * L);
  const T* pt = table.data();
  for (int t = 0; t < L; ++t)
    for (int c = 0; c < d; ++c)
      v[static_cast<size_t>(c) * L + t] = pt[static_cast<size_t>(ids[t]) * d + c];
  auto* nt = table.impl();
  return detail::make_op<T>({d, L}, std::move(v), {table},
                            [nt, ids, d, L](TensorNode<T>& self) {
                              Tensor<T>::ensure_grad(*nt);
                              for (int t = 0; t < L; ++t)
                                for (int c = 0; c < d; ++c)
                                  nt->grad[static_cast<size_t>(ids[t]) * d + c] +=
                                      self.grad[static_cast<size_t>(c) * L + t];
                            });
}

// ---------------------------------------------------------------------------
// Inverted dropout; identity when not training.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng, bool train) {
  if (rate < 0 || rate >= 1) throw ValueError("dropout: rate must be in [0, 1)");
  if (!train || rate == 0.0) return x;
  std::vector<T> mask(x.numel());
  T keep = static_cast<T>(1.0 / (1.0 - rate));
  for (size_t i = 0; i < mask.size(); ++i)
    mask[i] = rng.uniform() >= rate ? keep : T(0);
  return mul_const(x, mask);
}

// ---------------------------------------------------------------------------
// Gated highway combination: y = sigmoid(gate) ⊙ h + (1 - sigmoid(gate)) ⊙ x.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> highway_forward(const Tensor<T>& x, const Tensor<T>& h,
                          const Tensor<T>& gate_logits) {
  if (!detail::same_shape(x, h) || !detail::same_shape(x, gate_logits))
    throw ShapeError("highway_forward: shape mismatch");
  size_t n = x.numel();
  std::vector<T> v(n);
  const T *px = x.data(), *ph = h.data(), *pg = gate_logits.data();
  for (size_t i = 0; i < n; ++i) {
    T z = pg[i];
    T s = z >= 0 ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
    v[i] = s * ph[i] + (T(1) - s) * px[i];
  }
  auto *nx = x.impl(), *nh = h.impl(), *ng = gate_logits.impl();
  return detail::make_op<T>(
      x.shape(), std::move(v), {x, h, gate_logits},
      [nx, nh, ng, n](TensorNode<T>& self) {
        for (size_t i = 0; i < n; ++i) {
          T z = ng->value[i];
          T s = z >= 0 ? T(1) / (T(1) + std::exp(-z))
                       : std::exp(z) / (T(1) + std::exp(z));
          T g = self.grad[i];
          if (nh->requires_grad) {
            Tensor<T>::ensure_grad(*nh);
            nh->grad[i] += g * s;
          }
          if (nx->requires_grad) {
            Tensor<T>::ensure_grad(*nx);
            nx->grad[i] += g * (T(1) - s);
          }
          if (ng->requires_grad) {
            Tensor<T>::ensure_grad(*ng);
            ng->grad[i] += g * s * (T(1) - s) * (nh->value[i] - nx->value[i]);
          }
        }
      });
}

// Linear map on a vector: y {m} = W {m,n} v {n} + b {m}.
template <typename T>
Tensor<T> linear(const Tensor<T>& v, const Tensor<T>& w,
                 const std::optional<Tensor<T>>& bias) {
  if (v.ndim() != 1 || w.ndim() != 2) throw ShapeError("linear: bad ranks");
  int n = v.dim(0), m = w.dim(0);
  if (w.dim(1) != n) throw ShapeError("linear: dimension mismatch");
  std::vector<T> out(static_cast<size_t>(m), T(0));
  const T *pv = v.data(), *pw = w.data();
  for (int i = 0; i < m; ++i) {
    T s = bias ? bias->data()[i] : T(0);
    const T* row = pw + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) s += row[j] * pv[j];
    out[i] = s;
  }
  auto *nv = v.impl(), *nw = w.impl();
  TensorNode<T>* nb = bias ? bias->impl() : nullptr;
  auto bp = [nv, nw, nb, m, n](TensorNode<T>& self) {
    const T* g = self.grad.data();
    if (nv->requires_grad) {
      Tensor<T>::ensure_grad(*nv);
      for (int i = 0; i < m; ++i) {
        const T* row = nw->value.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) nv->grad[j] += g[i] * row[j];
      }
    }
    if (nw->requires_grad) {
      Tensor<T>::ensure_grad(*nw);
      for (int i = 0; i < m; ++i) {
        T* row = nw->grad.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) row[j] += g[i] * nv->value[j];
      }
    }
    if (nb && nb->requires_grad) {
      Tensor<T>::ensure_grad(*nb);
      for (int i = 0; i < m; ++i) nb->grad[i] += g[i];
    }
  };
  if (bias)
    return detail::make_op<T>({m}, std::move(out), {v, w, *bias}, std::move(bp));
  return detail::make_op<T>({m}, std::move(out), {v, w}, std::move(bp));
}

// ---------------------------------------------------------------------------
// Layer modules. Each registers its parameters in a ParamStore under a
// hierarchical prefix; forward methods are free of mutable state.
// ---------------------------------------------------------------------------

struct RunMode {
  bool train = false;
  Rng* rng = nullptr;  // required when train is true and dropout_rate > 0
};

template <typename T>
struct Conv1dLayer {
  Tensor<T> w, b;
  int dilation = 1;
  Pad pad = Pad::Same;

  Conv1dLayer() = default;
  Conv1dLayer(ParamStore<T>& ps, const std::string& prefix, int cin, int cout,
              int k, int dil, Pad p, Rng& rng)
      : dilation(dil), pad(p) {
    w = ps.create(prefix + ".w", xavier_init<T>({cout, cin, k}, cin * k, cout * k, rng));
    b = ps.create(prefix + ".b", Tensor<T>::zeros({cout}));
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    return conv1d<T>(x, w, b, dilation, pad);
  }
};

template <typename T>
struct ConvTranspose1dX2Layer {
  Tensor<T> w, b;

  ConvTranspose1dX2Layer() = default;
  ConvTranspose1dX2Layer(ParamStore<T>& ps, const std::string& prefix, int cin,
                         int cout, Rng& rng) {
    w = ps.create(prefix + ".w", xavier_init<T>({cout, cin, 2}, cin * 2, cout * 2, rng));
    b = ps.create(prefix + ".b", Tensor<T>::zeros({cout}));
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    return conv_transpose1d_x2<T>(x, w, b);
  }
};

template <typename T>
struct Conv2dLayer {
  Tensor<T> w, b;
  int sh = 1, sw = 1, ph = 0, pw = 0;

  Conv2dLayer() = default;
  Conv2dLayer(ParamStore<T>& ps, const std::string& prefix, int cin, int cout,
              int kh, int kw, int sh_, int sw_, int ph_, int pw2, Rng& rng)
      : sh(sh_), sw(sw_), ph(ph_), pw(pw2) {
    w = ps.create(prefix + ".w",
                  xavier_init<T>({cout, cin, kh, kw}, cin * kh * kw, cout * kh * kw, rng));
    b = ps.create(prefix + ".b", Tensor<T>::zeros({cout}));
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    return conv2d<T>(x, w, b, sh, sw, ph, pw);
  }
  // Input-tangent propagation: same weights, no bias on the tangent stream.
  Tensor<T> forward_tangent(const Tensor<T>& dx) const {
    return conv2d<T>(dx, w, std::nullopt, sh, sw, ph, pw);
  }
};

template <typename T>
struct EmbeddingLayer {
  Tensor<T> table;

  EmbeddingLayer() = default;
  EmbeddingLayer(ParamStore<T>& ps, const std::string& prefix, int vocab, int dim,
                 Rng& rng) {
    table = ps.create(prefix + ".table", xavier_init<T>({vocab, dim}, vocab, dim, rng));
  }

  Tensor<T> forward(const std::vector<int>& ids) const {
    return embedding<T>(ids, table);
  }
};

template <typename T>
struct LinearLayer {
  Tensor<T> w, b;

  LinearLayer() = default;
  LinearLayer(ParamStore<T>& ps, const std::string& prefix, int in, int out, Rng& rng) {
    w = ps.create(prefix + ".w", xavier_init<T>({out, in}, in, out, rng));
    b = ps.create(prefix + ".b", Tensor<T>::zeros({out}));
  }

  Tensor<T> forward(const Tensor<T>& v) const { return linear<T>(v, w, b); }
  Tensor<T> forward_tangent(const Tensor<T>& dv) const {
    return linear<T>(dv, w, std::nullopt);
  }
};

// Gated highway convolution block (DCTTS-style "HC"): one convolution emits
// 2d channels split into gate and candidate, combined with the residual
// input. Optional conditioning streams enter as learned 1x1 projections
// added to the pre-activations.
template <typename T>
struct HighwayConv1dLayer {
  Tensor<T> w, b;
  std::vector<Tensor<T>> cond_w;  // each {2d, d_cond, 1}
  int d = 0;
  int dilation = 1;
  Pad pad = Pad::Same;

  HighwayConv1dLayer() = default;
  HighwayConv1dLayer(ParamStore<T>& ps, const std::string& prefix, int d_, int k,
                     int dil, Pad p, Rng& rng, const std::vector<int>& cond_dims = {})
      : d(d_), dilation(dil), pad(p) {
    w = ps.create(prefix + ".w",
                  xavier_init<T>({2 * d, d, k}, d * k, 2 * d * k, rng));
    b = ps.create(prefix + ".b", Tensor<T>::zeros({2 * d}));
    for (size_t ci = 0; ci < cond_dims.size(); ++ci) {
      cond_w.push_back(ps.create(
          prefix + ".cond" + std::to_string(ci) + ".w",
          xavier_init<T>({2 * d, cond_dims[ci], 1}, cond_dims[ci], 2 * d, rng)));
    }
  }

  Tensor<T> forward(const Tensor<T>& x,
                    const std::vector<Tensor<T>>& conds = {}) const {
    if (conds.size() != cond_w.size())
      throw ShapeError("HighwayConv1dLayer: conditioning stream count mismatch");
    Tensor<T> pre = conv1d<T>(x, w, b, dilation, pad);
    for (size_t ci = 0; ci < conds.size(); ++ci)
      pre = add(pre, conv1d<T>(conds[ci], cond_w[ci], std::nullopt, 1, Pad::Same));
    Tensor<T> gate = slice_rows(pre, 0, d);
    Tensor<T> cand = slice_rows(pre, d, 2 * d);
    return highway_forward(x, cand, gate);
  }
};

}  // namespace svs
