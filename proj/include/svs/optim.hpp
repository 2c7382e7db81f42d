#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "svs/tensor.hpp"

namespace svs {

// Ordered map from hierarchical name ("melsyn.textenc.conv3.w") to parameter
// tensor. Iteration order is registration order and therefore deterministic.
template <typename T>
class ParamStore {
 public:
  Tensor<T> create(const std::string& name, Tensor<T> t) {
    if (index_.count(name)) throw ValueError("ParamStore: duplicate name " + name);
    t.set_requires_grad(true);
    index_[name] = items_.size();
    items_.emplace_back(name, t);
    return t;
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  Tensor<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValueError("ParamStore: unknown name " + name);
    return items_[it->second].second;
  }

  const std::vector<std::pair<std::string, Tensor<T>>>& items() const {
    return items_;
  }

  size_t size() const { return items_.size(); }

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
  }

  void zero_grad() {
    for (auto& [name, t] : items_) t.zero_grad();
  }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> items_;
  std::unordered_map<std::string, size_t> index_;
};

// Per-parameter Adam moments, aligned with the store's registration order.
template <typename T>
struct AdamState {
  struct Slot {
    std::vector<T> m, v;
  };
  std::vector<Slot> slots;
  int64_t t = 0;

  void init(const ParamStore<T>& params) {
    slots.clear();
    slots.resize(params.items().size());
    for (size_t i = 0; i < slots.size(); ++i) {
      size_t n = params.items()[i].second.numel();
      slots[i].m.assign(n, T(0));
      slots[i].v.assign(n, T(0));
    }
    t = 0;
  }
};

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

// Bias-corrected Adam update in place. Parameters without gradients are
// treated as having zero gradient (their moments still decay).
template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, const AdamConfig& cfg) {
  if (cfg.lr <= 0) throw ValueError("adam_step: lr must be > 0");
  if (state.slots.size() != params.items().size()) state.init(params);
  state.t += 1;
  T c1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(state.t)));
  T c2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(state.t)));
  T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);
  for (size_t pi = 0; pi < params.items().size(); ++pi) {
    const std::string& name = params.items()[pi].first;
    Tensor<T> tensor = params.items()[pi].second;  // shared handle
    auto& slot = state.slots[pi];
    size_t n = tensor.numel();
    if (slot.m.size() != n)
      throw ShapeError("adam_step: state shape mismatch for " + name);
    const T* g = tensor.has_grad() ? tensor.grad().data() : nullptr;
    if (g) {
      for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(static_cast<double>(g[i])))
          throw NumericError("adam_step: non-finite gradient in parameter " + name);
    }
    T* p = tensor.data();
    for (size_t i = 0; i < n; ++i) {
      T gi = g ? g[i] : T(0);
      slot.m[i] = b1 * slot.m[i] + (T(1) - b1) * gi;
      slot.v[i] = b2 * slot.v[i] + (T(1) - b2) * gi * gi;
      T mhat = slot.m[i] / c1;
      T vhat = slot.v[i] / c2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// Central-difference gradient check in double precision. `f` rebuilds the
// scalar loss from scratch on every call and must read `x` by reference
// (closure over the same tensor whose entries are perturbed here).
template <typename F>
double grad_check(F&& f, Tensor<double>& x, double eps = 1e-5) {
  x.set_requires_grad(true);
  x.zero_grad();
  Tensor<double> loss = f();
  if (!std::isfinite(loss.item()))
    throw NumericError("grad_check: non-finite loss value");
  loss.backward();
  std::vector<double> analytic =
      x.has_grad() ? x.grad() : std::vector<double>(x.numel(), 0.0);

  double max_err = 0.0;
  double* px = x.data();
  for (size_t i = 0; i < x.numel(); ++i) {
    double orig = px[i];
    double fp, fm;
    {
      NoGradGuard ng;
      px[i] = orig + eps;
      fp = f().item();
      px[i] = orig - eps;
      fm = f().item();
      px[i] = orig;
    }
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("grad_check: non-finite loss during perturbation");
    double fd = (fp - fm) / (2.0 * eps);
    double err = std::abs(analytic[i] - fd) /
                 std::max(1.0, std::abs(analytic[i]));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace svs
