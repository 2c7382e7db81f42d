#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "svs/common.hpp"

namespace svs {

// ---------------------------------------------------------------------------
// Grad mode. Recording can be switched off (inference, finite differences);
// ops built while disabled produce graph-free tensors.
// ---------------------------------------------------------------------------

namespace detail {
inline thread_local bool grad_mode_enabled = true;
}

inline bool grad_enabled() { return detail::grad_mode_enabled; }

struct NoGradGuard {
  NoGradGuard() : prev_(detail::grad_mode_enabled) { detail::grad_mode_enabled = false; }
  ~NoGradGuard() { detail::grad_mode_enabled = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// ---------------------------------------------------------------------------
// Tensor: shape + value buffer + optional grad, linked into a define-by-run
// tape. The tape lives in the `parents`/`backprop` fields and is torn down
// at the end of every backward pass.
// ---------------------------------------------------------------------------

template <typename T>
struct TensorNode {
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated on first use, same length as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;  // reads this->grad, adds to parents
};

template <typename T>
class Tensor {
 public:
  using Scalar = T;
  using Node = TensorNode<T>;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape) {
    Tensor t;
    t.n_ = std::make_shared<Node>();
    t.n_->shape = std::move(shape);
    t.n_->value.assign(t.numel_of(t.n_->shape), T(0));
    return t;
  }

  static Tensor full(std::vector<int> shape, T fill) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.n_->value.begin(), t.n_->value.end(), fill);
    return t;
  }

  static Tensor from_data(std::vector<int> shape, std::vector<T> data) {
    Tensor t;
    t.n_ = std::make_shared<Node>();
    if (data.size() != numel_of(shape))
      throw ShapeError("Tensor::from_data: data length does not match shape");
    t.n_->shape = std::move(shape);
    t.n_->value = std::move(data);
    return t;
  }

  static Tensor scalar(T v) { return from_data({1}, {v}); }

  bool defined() const { return n_ != nullptr; }
  const std::vector<int>& shape() const { return n_->shape; }
  size_t numel() const { return n_->value.size(); }
  int dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(n_->shape.size()); }

  T* data() { return n_->value.data(); }
  const T* data() const { return n_->value.data(); }
  std::vector<T>& values() { return n_->value; }
  const std::vector<T>& values() const { return n_->value; }

  T item() const {
    if (numel() != 1) throw ShapeError("Tensor::item: tensor is not scalar");
    return n_->value[0];
  }

  bool requires_grad() const { return n_->requires_grad; }

  Tensor& set_requires_grad(bool rg = true) {
    if (rg && n_->backprop)
      throw ValueError("set_requires_grad: only leaf tensors can be marked");
    n_->requires_grad = rg;
    return *this;
  }

  bool is_leaf() const { return !n_->backprop && n_->parents.empty(); }

  const std::vector<T>& grad() const {
    if (n_->grad.empty()) throw ValueError("Tensor::grad: no gradient present");
    return n_->grad;
  }

  bool has_grad() const { return !n_->grad.empty(); }

  void zero_grad() {
    if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), T(0));
  }

  void drop_grad() { n_->grad.clear(); }

  // Deep copy of the values, detached from any graph.
  Tensor detach() const {
    Tensor t;
    t.n_ = std::make_shared<Node>();
    t.n_->shape = n_->shape;
    t.n_->value = n_->value;
    return t;
  }

  bool has_nonfinite() const {
    for (T v : n_->value)
      if (!std::isfinite(static_cast<double>(v))) return true;
    return false;
  }

  void check_finite(const std::string& what) const {
    if (has_nonfinite()) throw NumericError("non-finite values in " + what);
  }

  // Reverse pass from a scalar. The graph reachable from this node is freed
  // afterwards; leaf gradients stay in place for the optimizer to consume.
  void backward() {
    if (numel() != 1) throw ShapeError("backward: loss must be scalar");
    if (!n_->requires_grad)
      throw ValueError("backward: tensor does not require grad");

    std::vector<Node*> order;
    topo_sort(order);
    ensure_grad(*n_);
    n_->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      if (node->backprop && !node->grad.empty()) node->backprop(*node);
    }
    for (Node* node : order) {  // free the tape
      node->backprop = nullptr;
      node->parents.clear();
    }
  }

  Node* impl() const { return n_.get(); }
  const std::shared_ptr<Node>& handle() const { return n_; }

  static size_t numel_of(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw ShapeError("Tensor: non-positive dimension");
      n *= static_cast<size_t>(d);
    }
    return n;
  }

  static void ensure_grad(Node& node) {
    if (node.grad.empty()) node.grad.assign(node.value.size(), T(0));
  }

 private:
  void topo_sort(std::vector<Node*>& order) const {
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(n_.get(), 0);
    seen.insert(n_.get());
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < node->parents.size()) {
        Node* p = node->parents[idx++].get();
        if (seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<Node> n_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// ---------------------------------------------------------------------------
// Op construction helper.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape();
}

template <typename T, typename Backprop>
Tensor<T> make_op(std::vector<int> shape, std::vector<T> value,
                  std::initializer_list<Tensor<T>> inputs, Backprop&& bp) {
  Tensor<T> out = Tensor<T>::from_data(std::move(shape), std::move(value));
  bool rg = false;
  if (grad_enabled())
    for (const Tensor<T>& in : inputs) rg = rg || in.requires_grad();
  if (rg) {
    auto* node = out.impl();
    node->requires_grad = true;
    for (const Tensor<T>& in : inputs) node->parents.push_back(in.handle());
    node->backprop = std::forward<Backprop>(bp);
  }
  return out;
}

template <typename T>
void accumulate(TensorNode<T>& dst, const T* g, size_t n) {
  Tensor<T>::ensure_grad(dst);
  T* d = dst.grad.data();
  for (size_t i = 0; i < n; ++i) d[i] += g[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (!detail::same_shape(a, b)) throw ShapeError("add: shape mismatch");
  size_t n = a.numel();
  std::vector<T> v(n);
  const T *pa = a.data(), *pb = b.data();
  for (size_t i = 0; i < n; ++i) v[i] = pa[i] + pb[i];
  auto *na = a.impl(), *nb = b.impl();
  return detail::make_op<T>(
      a.shape(), std::move(v), {a, b}, [na, nb, n](TensorNode<T>& self) {
        if (na->requires_grad) detail::accumulate(*na, self.grad.data(), n);
        if (nb->requires_grad) detail::accumulate(*nb, self.grad.data(), n);
      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  if (!detail::same_shape(a, b)) throw ShapeError("sub: shape mismatch");
  size_t n = a.numel();
  std::vector<T> v(n);
  const T *pa = a.data(), *pb = b.data();
  for (size_t i = 0; i < n; ++i) v[i] = pa[i] - pb[i];
  auto *na = a.impl(), *nb = b.impl();
  return detail::make_op<T>(
      a.shape(), std::move(v), {a, b}, [na, nb, n](TensorNode<T>& self) {
        if (na->requires_grad) detail::accumulate(*na, self.grad.data(), n);
        if (nb->requires_grad) {
          Tensor<T>::ensure_grad(*nb);
          for (size_t i = 0; i < n; ++i) nb->grad[i] -= self.grad[i];
        }
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (!detail::same_shape(a, b)) throw ShapeError("mul: shape mismatch");
  size_t n = a.numel();
  std::vector<T> v(n);
  const T *pa = a.data(), *pb = b.data();
  for (size_t i = 0; i < n; ++i) v[i] = pa[i] * pb[i];
  auto *na = a.impl(), *nb = b.impl();
  return detail::make_op<T>(
      a.shape(), std::move(v), {a, b}, [na, nb, n](TensorNode<T>& self) {
        if (na->requires_grad) {
          Tensor<T>::ensure_grad(*na);
          for (size_t i = 0; i < n; ++i)
            na->grad[i] += self.grad[i] * nb->value[i];
        }
        if (nb->requires_grad) {
          Tensor<T>::ensure_grad(*nb);
          for (size_t i = 0; i < n; ++i)
            nb->grad[i] += self.grad[i] * na->value[i];
        }
      });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  size_t n = a.numel();
  std::vector<T> v(n);
  const T* pa = a.data();
  for (size_t i = 0; i < n; ++i) v[i] = pa[i] * c;
  auto* na = a.impl();
  return detail::make_op<T>(a.shape(), std::move(v), {a},
                            [na, n, c](TensorNode<T>& self) {
                              Tensor<T>::ensure_grad(*na);
                              for (size_t i = 0; i < n; ++i)
                                na->grad[i] += self.grad[i] * c;
                            });
}

// Elementwise product with a constant mask (no gradient into the mask).
template <typename T>
Tensor<T> mul_const(const Tensor<T>& a, const std::vector<T>& mask) {
  size_t n = a.numel();
  if (mask.size() != n) throw ShapeError("mul_const: mask length mismatch");
  std::vector<T> v(n);
  const T* pa = a.data();
  for (size_t i = 0; i < n; ++i) v[i] = pa[i] * mask[i];
  auto* na = a.impl();
  return detail::make_op<T>(a.shape(), std::move(v), {a},
                            [na, n, mask](TensorNode<T>& self) {
                              Tensor<T>::ensure_grad(*na);
                              for (size_t i = 0; i < n; ++i)
                                na->grad[i] += self.grad[i] * mask[i];
                            });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  size_t n = a.numel();
  std::vector<T> v(n);
  const T* pa = a.data();
  for (size_t i = 0; i < n; ++i) {
    T x = pa[i];
    v[i] = x >= 0 ? T(1) / (T(1) + std::exp(-x))
                  : std::exp(x) / (T(1) + std::exp(x));
  }
  auto* na = a.impl();
  return detail::make_op<T>(a.shape(), std::move(v), {a},
                            [na, n](TensorNode<T>& self) {
                              Tensor<T>::ensure_grad(*na);
                              for (size_t i = 0; i < n; ++i) {
                                T y = self.value[i];
                                na->grad[i] += self.grad[i] * y * (T(1) - y);
                              }
                            });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  size_t n = a.numel();
  std::vector<T> v(n);
  const T* pa = a.data();
  for (size_t i = 0; i < n; ++i) v[i] = pa[i] > 0 ? pa[i] : T(0);
  auto* na = a.impl();
  return detail::make_op<T>(a.shape(), std::move(v), {a},
                            [na, n](TensorNode<T>& self) {
                              Tensor<T>::ensure_grad(*na);
                              for (size_t i = 0; i < n; ++i)
                                if (na->value[i] > 0)
                                  na->grad[i] += self.grad[i];
                            });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T alpha = T(0.2)) {
  size_t n = a.numel();
  std::vector<T> v(n);
  const T* pa = a.data();
  for (size_t i = 0; i < n; ++i) v[i] = pa[i] > 0 ? pa[i] : alpha * pa[i];
  auto* na = a.impl();
  return detail::make_op<T>(a.shape(), std::move(v), {a},
                            [na, n, alpha](TensorNode<T>& self) {
                              Tensor<T>::ensure_grad(*na);
                              for (size_t i = 0; i < n; ++i)
                                na->grad[i] += self.grad[i] *
                                               (na->value[i] > 0 ? T(1) : alpha);
                            });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& a) {
  size_t n = a.numel();
  std::vector<T> v(n);
  const T* pa = a.data();
  for (size_t i = 0; i < n; ++i) {
    T x = pa[i];
    v[i] = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }
  auto* na = a.impl();
  return detail::make_op<T>(a.shape(), std::move(v), {a},
                            [na, n](TensorNode<T>& self) {
                              Tensor<T>::ensure_grad(*na);
                              for (size_t i = 0; i < n; ++i) {
                                T x = na->value[i];
                                T s = x >= 0
                                          ? T(1) / (T(1) + std::exp(-x))
                                          : std::exp(x) / (T(1) + std::exp(x));
                                na->grad[i] += self.grad[i] * s;
                              }
                            });
}

// ---------------------------------------------------------------------------
// Reductions and losses.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  size_t n = a.numel();
  T s = std::accumulate(a.data(), a.data() + n, T(0));
  auto* na = a.impl();
  return detail::make_op<T>({1}, {s}, {a}, [na, n](TensorNode<T>& self) {
    Tensor<T>::ensure_grad(*na);
    T g = self.grad[0];
    for (size_t i = 0; i < n; ++i) na->grad[i] += g;
  });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  size_t n = a.numel();
  T s = std::accumulate(a.data(), a.data() + n, T(0)) / static_cast<T>(n);
  auto* na = a.impl();
  return detail::make_op<T>({1}, {s}, {a}, [na, n](TensorNode<T>& self) {
    Tensor<T>::ensure_grad(*na);
    T g = self.grad[0] / static_cast<T>(n);
    for (size_t i = 0; i < n; ++i) na->grad[i] += g;
  });
}

// mean |a - b|; the subgradient at ties is 0.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b) {
  if (!detail::same_shape(a, b)) throw ShapeError("l1_loss: shape mismatch");
  size_t n = a.numel();
  const T *pa = a.data(), *pb = b.data();
  T s = 0;
  for (size_t i = 0; i < n; ++i) s += std::abs(pa[i] - pb[i]);
  s /= static_cast<T>(n);
  auto *na = a.impl(), *nb = b.impl();
  return detail::make_op<T>({1}, {s}, {a, b}, [na, nb, n](TensorNode<T>& self) {
    T g = self.grad[0] / static_cast<T>(n);
    for (size_t i = 0; i < n; ++i) {
      T d = na->value[i] - nb->value[i];
      T sg = d > 0 ? g : (d < 0 ? -g : T(0));
      if (na->requires_grad) {
        Tensor<T>::ensure_grad(*na);
        na->grad[i] += sg;
      }
      if (nb->requires_grad) {
        Tensor<T>::ensure_grad(*nb);
        nb->grad[i] -= sg;
      }
    }
  });
}

// sum(a .* w) / numel with a constant weight matrix.
template <typename T>
Tensor<T> weighted_mean(const Tensor<T>& a, const std::vector<T>& w) {
  size_t n = a.numel();
  if (w.size() != n) throw ShapeError("weighted_mean: weight length mismatch");
  const T* pa = a.data();
  T s = 0;
  for (size_t i = 0; i < n; ++i) s += pa[i] * w[i];
  s /= static_cast<T>(n);
  auto* na = a.impl();
  return detail::make_op<T>({1}, {s}, {a}, [na, n, w](TensorNode<T>& self) {
    Tensor<T>::ensure_grad(*na);
    T g = self.grad[0] / static_cast<T>(n);
    for (size_t i = 0; i < n; ++i) na->grad[i] += g * w[i];
  });
}

// mean over elements of softplus(z) - t*z == BCE(sigmoid(z), t), stable form.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& z, const Tensor<T>& target) {
  if (!detail::same_shape(z, target))
    throw ShapeError("bce_with_logits: shape mismatch");
  size_t n = z.numel();
  const T *pz = z.data(), *pt = target.data();
  T s = 0;
  for (size_t i = 0; i < n; ++i) {
    T x = pz[i];
    T sp = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    s += sp - pt[i] * x;
  }
  s /= static_cast<T>(n);
  auto *nz = z.impl(), *nt = target.impl();
  return detail::make_op<T>({1}, {s}, {z, target}, [nz, nt, n](TensorNode<T>& self) {
    if (!nz->requires_grad) return;
    Tensor<T>::ensure_grad(*nz);
    T g = self.grad[0] / static_cast<T>(n);
    for (size_t i = 0; i < n; ++i) {
      T x = nz->value[i];
      T sig = x >= 0 ? T(1) / (T(1) + std::exp(-x))
                     : std::exp(x) / (T(1) + std::exp(x));
      nz->grad[i] += g * (sig - nt->value[i]);
    }
  });
}

// Binary divergence on probabilities, clamped away from {0,1} for stability.
// Gradient is zero where the clamp is active.
template <typename T>
Tensor<T> binary_divergence(const Tensor<T>& p, const Tensor<T>& target,
                            T eps = T(1e-7)) {
  if (!detail::same_shape(p, target))
    throw ShapeError("binary_divergence: shape mismatch");
  size_t n = p.numel();
  const T *pp = p.data(), *pt = target.data();
  T s = 0;
  for (size_t i = 0; i < n; ++i) {
    T q = std::clamp(pp[i], eps, T(1) - eps);
    s += -pt[i] * std::log(q) - (T(1) - pt[i]) * std::log(T(1) - q);
  }
  s /= static_cast<T>(n);
  auto *np = p.impl(), *nt = target.impl();
  return detail::make_op<T>(
      {1}, {s}, {p, target}, [np, nt, n, eps](TensorNode<T>& self) {
        if (!np->requires_grad) return;
        Tensor<T>::ensure_grad(*np);
        T g = self.grad[0] / static_cast<T>(n);
        for (size_t i = 0; i < n; ++i) {
          T x = np->value[i];
          if (x <= eps || x >= T(1) - eps) continue;
          np->grad[i] += g * (x - nt->value[i]) / (x * (T(1) - x));
        }
      });
}

// Flattened inner product sum(a .* b) over identically shaped tensors.
template <typename T>
Tensor<T> inner_sum(const Tensor<T>& a, const Tensor<T>& b) {
  if (!detail::same_shape(a, b)) throw ShapeError("inner_sum: shape mismatch");
  size_t n = a.numel();
  const T *pa = a.data(), *pb = b.data();
  T s = 0;
  for (size_t i = 0; i < n; ++i) s += pa[i] * pb[i];
  auto *na = a.impl(), *nb = b.impl();
  return detail::make_op<T>({1}, {s}, {a, b}, [na, nb, n](TensorNode<T>& self) {
    T g = self.grad[0];
    if (na->requires_grad) {
      Tensor<T>::ensure_grad(*na);
      for (size_t i = 0; i < n; ++i) na->grad[i] += g * nb->value[i];
    }
    if (nb->requires_grad) {
      Tensor<T>::ensure_grad(*nb);
      for (size_t i = 0; i < n; ++i) nb->grad[i] += g * na->value[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Matrix ops (2-d tensors, row-major {rows, cols}).
// ---------------------------------------------------------------------------

namespace detail {
template <typename T>
void require_matrix(const Tensor<T>& a, const char* who) {
  if (a.ndim() != 2) throw ShapeError(std::string(who) + ": expected 2-d tensor");
}
}  // namespace detail

// C = A(m,k) * B(k,n)
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_matrix(a, "matmul");
  detail::require_matrix(b, "matmul");
  int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) throw ShapeError("matmul: inner dimensions differ");
  std::vector<T> v(static_cast<size_t>(m) * n, T(0));
  const T *pa = a.data(), *pb = b.data();
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      T av = pa[i * k + p];
      const T* brow = pb + static_cast<size_t>(p) * n;
      T* crow = v.data() + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  auto *na = a.impl(), *nb = b.impl();
  return detail::make_op<T>(
      {m, n}, std::move(v), {a, b}, [na, nb, m, k, n](TensorNode<T>& self) {
        const T* g = self.grad.data();
        if (na->requires_grad) {  // dA = G * B^T
          Tensor<T>::ensure_grad(*na);
          for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
              T s = 0;
              const T* grow = g + static_cast<size_t>(i) * n;
              const T* brow = nb->value.data() + static_cast<size_t>(p) * n;
              for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
              na->grad[i * k + p] += s;
            }
        }
        if (nb->requires_grad) {  // dB = A^T * G
          Tensor<T>::ensure_grad(*nb);
          for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
              T av = na->value[i * k + p];
              const T* grow = g + static_cast<size_t>(i) * n;
              T* brow = nb->grad.data() + static_cast<size_t>(p) * n;
              for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
            }
        }
      });
}

// C = A^T(m,k->k,m) ... i.e. C(i,j) = sum_p A(p,i) * B(p,j) for A(k,m), B(k,n).
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_matrix(a, "matmul_tn");
  detail::require_matrix(b, "matmul_tn");
  int k = a.dim(0), m = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) throw ShapeError("matmul_tn: inner dimensions differ");
  std::vector<T> v(static_cast<size_t>(m) * n, T(0));
  const T *pa = a.data(), *pb = b.data();
  for (int p = 0; p < k; ++p) {
    const T* arow = pa + static_cast<size_t>(p) * m;
    const T* brow = pb + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      T av = arow[i];
      T* crow = v.data() + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  auto *na = a.impl(), *nb = b.impl();
  return detail::make_op<T>(
      {m, n}, std::move(v), {a, b}, [na, nb, m, k, n](TensorNode<T>& self) {
        const T* g = self.grad.data();
        if (na->requires_grad) {  // dA(p,i) = sum_j G(i,j) B(p,j)
          Tensor<T>::ensure_grad(*na);
          for (int p = 0; p < k; ++p)
            for (int i = 0; i < m; ++i) {
              T s = 0;
              const T* grow = g + static_cast<size_t>(i) * n;
              const T* brow = nb->value.data() + static_cast<size_t>(p) * n;
              for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
              na->grad[p * m + i] += s;
            }
        }
        if (nb->requires_grad) {  // dB(p,j) = sum_i A(p,i) G(i,j)
          Tensor<T>::ensure_grad(*nb);
          for (int p = 0; p < k; ++p)
            for (int i = 0; i < m; ++i) {
              T av = na->value[p * m + i];
              const T* grow = g + static_cast<size_t>(i) * n;
              T* brow = nb->grad.data() + static_cast<size_t>(p) * n;
              for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
            }
        }
      });
}

// Softmax over dim 0 (independently per column) of a {m, n} tensor.
template <typename T>
Tensor<T> softmax_cols(const Tensor<T>& a) {
  detail::require_matrix(a, "softmax_cols");
  int m = a.dim(0), n = a.dim(1);
  std::vector<T> v(a.numel());
  const T* pa = a.data();
  for (int j = 0; j < n; ++j) {
    T mx = pa[j];
    for (int i = 1; i < m; ++i) mx = std::max(mx, pa[i * n + j]);
    T s = 0;
    for (int i = 0; i < m; ++i) {
      T e = std::exp(pa[i * n + j] - mx);
      v[i * n + j] = e;
      s += e;
    }
    for (int i = 0; i < m; ++i) v[i * n + j] /= s;
  }
  auto* na = a.impl();
  return detail::make_op<T>(
      a.shape(), std::move(v), {a}, [na, m, n](TensorNode<T>& self) {
        Tensor<T>::ensure_grad(*na);
        for (int j = 0; j < n; ++j) {
          T dot = 0;
          for (int i = 0; i < m; ++i)
            dot += self.grad[i * n + j] * self.value[i * n + j];
          for (int i = 0; i < m; ++i)
            na->grad[i * n + j] += self.value[i * n + j] *
                                   (self.grad[i * n + j] - dot);
        }
      });
}

// ---------------------------------------------------------------------------
// Structural ops on {channels, time} matrices.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_matrix(a, "concat_rows");
  detail::require_matrix(b, "concat_rows");
  if (a.dim(1) != b.dim(1)) throw ShapeError("concat_rows: time mismatch");
  int ra = a.dim(0), rb = b.dim(0), L = a.dim(1);
  std::vector<T> v(static_cast<size_t>(ra + rb) * L);
  std::copy(a.data(), a.data() + a.numel(), v.begin());
  std::copy(b.data(), b.data() + b.numel(), v.begin() + a.numel());
  auto *na = a.impl(), *nb = b.impl();
  size_t sa = a.numel(), sb = b.numel();
  return detail::make_op<T>(
      {ra + rb, L}, std::move(v), {a, b}, [na, nb, sa, sb](TensorNode<T>& self) {
        if (na->requires_grad) detail::accumulate(*na, self.grad.data(), sa);
        if (nb->requires_grad)
          detail::accumulate(*nb, self.grad.data() + sa, sb);
      });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, int r0, int r1) {
  detail::require_matrix(a, "slice_rows");
  int R = a.dim(0), L = a.dim(1);
  if (r0 < 0 || r1 > R || r0 >= r1) throw ShapeError("slice_rows: bad range");
  std::vector<T> v(static_cast<size_t>(r1 - r0) * L);
  std::copy(a.data() + static_cast<size_t>(r0) * L,
            a.data() + static_cast<size_t>(r1) * L, v.begin());
  auto* na = a.impl();
  return detail::make_op<T>({r1 - r0, L}, std::move(v), {a},
                            [na, r0, L](TensorNode<T>& self) {
                              Tensor<T>::ensure_grad(*na);
                              size_t off = static_cast<size_t>(r0) * L;
                              for (size_t i = 0; i < self.grad.size(); ++i)
                                na->grad[off + i] += self.grad[i];
                            });
}

// y[:, 0] = 0, y[:, t] = x[:, t-1]: the teacher-forcing shift.
template <typename T>
Tensor<T> shift_right_time(const Tensor<T>& a) {
  detail::require_matrix(a, "shift_right_time");
  int C = a.dim(0), L = a.dim(1);
  std::vector<T> v(a.numel(), T(0));
  const T* pa = a.data();
  for (int c = 0; c < C; ++c)
    for (int t = 1; t < L; ++t) v[c * L + t] = pa[c * L + t - 1];
  auto* na = a.impl();
  return detail::make_op<T>(a.shape(), std::move(v), {a},
                            [na, C, L](TensorNode<T>& self) {
                              Tensor<T>::ensure_grad(*na);
                              for (int c = 0; c < C; ++c)
                                for (int t = 1; t < L; ++t)
                                  na->grad[c * L + t - 1] +=
                                      self.grad[c * L + t];
                            });
}

// y[:, t] = x[:, t] - x[:, t-1] with an implicit zero frame at t = -1.
template <typename T>
Tensor<T> diff_time(const Tensor<T>& a) {
  detail::require_matrix(a, "diff_time");
  int C = a.dim(0), L = a.dim(1);
  std::vector<T> v(a.numel());
  const T* pa = a.data();
  for (int c = 0; c < C; ++c) {
    v[c * L] = pa[c * L];
    for (int t = 1; t < L; ++t)
      v[c * L + t] = pa[c * L + t] - pa[c * L + t - 1];
  }
  auto* na = a.impl();
  return detail::make_op<T>(a.shape(), std::move(v), {a},
                            [na, C, L](TensorNode<T>& self) {
                              Tensor<T>::ensure_grad(*na);
                              for (int c = 0; c < C; ++c)
                                for (int t = 0; t < L; ++t) {
                                  T g = self.grad[c * L + t];
                                  na->grad[c * L + t] += g;
                                  if (t > 0) na->grad[c * L + t - 1] -= g;
                                }
                            });
}

// Nearest-neighbor time upsampling: frame i occupies output frames 4i..4i+3.
template <typename T>
Tensor<T> repeat4_time(const Tensor<T>& a) {
  detail::require_matrix(a, "repeat4_time");
  int C = a.dim(0), L = a.dim(1);
  std::vector<T> v(static_cast<size_t>(C) * L * 4);
  const T* pa = a.data();
  for (int c = 0; c < C; ++c)
    for (int t = 0; t < L; ++t) {
      T x = pa[c * L + t];
      for (int j = 0; j < 4; ++j) v[static_cast<size_t>(c) * 4 * L + 4 * t + j] = x;
    }
  auto* na = a.impl();
  return detail::make_op<T>({C, 4 * L}, std::move(v), {a},
                            [na, C, L](TensorNode<T>& self) {
                              Tensor<T>::ensure_grad(*na);
                              for (int c = 0; c < C; ++c)
                                for (int t = 0; t < L; ++t) {
                                  T s = 0;
                                  for (int j = 0; j < 4; ++j)
                                    s += self.grad[static_cast<size_t>(c) * 4 * L +
                                                   4 * t + j];
                                  na->grad[c * L + t] += s;
                                }
                            });
}

// Keep even time indices: y[:, u] = x[:, 2u].
template <typename T>
Tensor<T> subsample2_time(const Tensor<T>& a) {
  detail::require_matrix(a, "subsample2_time");
  int C = a.dim(0), L = a.dim(1);
  if (L % 2 != 0) throw ShapeError("subsample2_time: odd length");
  int Lo = L / 2;
  std::vector<T> v(static_cast<size_t>(C) * Lo);
  const T* pa = a.data();
  for (int c = 0; c < C; ++c)
    for (int u = 0; u < Lo; ++u) v[c * Lo + u] = pa[c * L + 2 * u];
  auto* na = a.impl();
  return detail::make_op<T>({C, Lo}, std::move(v), {a},
                            [na, C, L, Lo](TensorNode<T>& self) {
                              Tensor<T>::ensure_grad(*na);
                              for (int c = 0; c < C; ++c)
                                for (int u = 0; u < Lo; ++u)
                                  na->grad[c * L + 2 * u] +=
                                      self.grad[c * Lo + u];
                            });
}

template <typename T>
Tensor<T> crop_time(const Tensor<T>& a, int t0, int t1) {
  detail::require_matrix(a, "crop_time");
  int C = a.dim(0), L = a.dim(1);
  if (t0 < 0 || t1 > L || t0 >= t1) throw ShapeError("crop_time: bad range");
  int Lo = t1 - t0;
  std::vector<T> v(static_cast<size_t>(C) * Lo);
  const T* pa = a.data();
  for (int c = 0; c < C; ++c)
    std::copy(pa + c * L + t0, pa + c * L + t1, v.begin() + c * Lo);
  auto* na = a.impl();
  return detail::make_op<T>({C, Lo}, std::move(v), {a},
                            [na, C, L, t0, Lo](TensorNode<T>& self) {
                              Tensor<T>::ensure_grad(*na);
                              for (int c = 0; c < C; ++c)
                                for (int t = 0; t < Lo; ++t)
                                  na->grad[c * L + t0 + t] +=
                                      self.grad[c * Lo + t];
                            });
}

// ---------------------------------------------------------------------------
// Pooling over {C, H, W} tensors.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> mean_over_hw(const Tensor<T>& a) {
  if (a.ndim() != 3) throw ShapeError("mean_over_hw: expected 3-d tensor");
  int C = a.dim(0), H = a.dim(1), W = a.dim(2);
  std::vector<T> v(static_cast<size_t>(C), T(0));
  const T* pa = a.data();
  size_t hw = static_cast<size_t>(H) * W;
  for (int c = 0; c < C; ++c) {
    T s = 0;
    const T* p = pa + c * hw;
    for (size_t i = 0; i < hw; ++i) s += p[i];
    v[c] = s / static_cast<T>(hw);
  }
  auto* na = a.impl();
  return detail::make_op<T>({C}, std::move(v), {a},
                            [na, C, hw](TensorNode<T>& self) {
                              Tensor<T>::ensure_grad(*na);
                              for (int c = 0; c < C; ++c) {
                                T g = self.grad[c] / static_cast<T>(hw);
                                T* p = na->grad.data() + c * hw;
                                for (size_t i = 0; i < hw; ++i) p[i] += g;
                              }
                            });
}

template <typename T>
Tensor<T> mean_over_h(const Tensor<T>& a) {
  if (a.ndim() != 3) throw ShapeError("mean_over_h: expected 3-d tensor");
  int C = a.dim(0), H = a.dim(1), W = a.dim(2);
  std::vector<T> v(static_cast<size_t>(C) * W, T(0));
  const T* pa = a.data();
  for (int c = 0; c < C; ++c)
    for (int h = 0; h < H; ++h) {
      const T* row = pa + (static_cast<size_t>(c) * H + h) * W;
      T* out = v.data() + static_cast<size_t>(c) * W;
      for (int w = 0; w < W; ++w) out[w] += row[w];
    }
  for (T& x : v) x /= static_cast<T>(H);
  auto* na = a.impl();
  return detail::make_op<T>({C, W}, std::move(v), {a},
                            [na, C, H, W](TensorNode<T>& self) {
                              Tensor<T>::ensure_grad(*na);
                              for (int c = 0; c < C; ++c)
                                for (int h = 0; h < H; ++h) {
                                  T* row = na->grad.data() +
                                           (static_cast<size_t>(c) * H + h) * W;
                                  const T* g = self.grad.data() +
                                               static_cast<size_t>(c) * W;
                                  for (int w = 0; w < W; ++w)
                                    row[w] += g[w] / static_cast<T>(H);
                                }
                            });
}

}  // namespace svs
