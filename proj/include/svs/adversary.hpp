#pragma once

#include <string>
#include <vector>

#include "svs/melsyn.hpp"

namespace svs {

// f(t) = -log(1 + exp(-t)) = log sigmoid(t), softplus-stable.
template <typename T>
Tensor<T> f_gan(const Tensor<T>& t) {
  return scale(softplus(scale(t, T(-1))), T(-1));
}

template <typename T>
struct DiscOutput {
  Tensor<T> logit;      // scalar: base + projection
  Tensor<T> base_term;  // unconditional head
  Tensor<T> proj_term;  // condition inner product
};

// Conditional projection discriminator. The main path is a five-block strided
// 2-d conv stack over the linear spectrogram (time downsampled twice to reach
// the condition's coarse resolution); the condition path is a single 1-d conv
// over the mel. A 3x3 conv on the block-5 feature map, pooled over frequency,
// meets the condition features in a flattened inner product that is added to
// the pooled linear head.
template <typename T>
class Discriminator {
 public:
  Discriminator(ParamStore<T>& ps, const NetConfig& cfg, Rng& rng,
                const std::string& prefix = "disc")
      : cfg_(cfg) {
    int c = cfg.disc_channels;
    blocks_.emplace_back(ps, prefix + ".b1", 1, c, 3, 3, 2, 2, 1, 1, rng);
    blocks_.emplace_back(ps, prefix + ".b2", c, 2 * c, 3, 3, 2, 2, 1, 1, rng);
    blocks_.emplace_back(ps, prefix + ".b3", 2 * c, 4 * c, 3, 3, 2, 1, 1, 1, rng);
    blocks_.emplace_back(ps, prefix + ".b4", 4 * c, 4 * c, 3, 3, 2, 1, 1, 1, rng);
    blocks_.emplace_back(ps, prefix + ".b5", 4 * c, 4 * c, 3, 3, 2, 1, 1, 1, rng);
    proj_conv_ = Conv2dLayer<T>(ps, prefix + ".proj", 4 * c, 4 * c, 3, 3, 1, 1, 1, 1, rng);
    cond_conv_ = Conv1dLayer<T>(ps, prefix + ".cond", cfg.mel_bins, 4 * c, 3, 1, Pad::Same, rng);
    head_ = LinearLayer<T>(ps, prefix + ".head", 4 * c, 1, rng);
    for (const auto& [name, t] : ps.items())
      if (name.rfind(prefix + ".", 0) == 0) params_.push_back(t);
  }

  // S_lin {513, 4L}, mel {80, L}.
  DiscOutput<T> forward(const Tensor<T>& s_lin, const Tensor<T>& mel) const {
    validate(s_lin, mel);
    Tensor<T> h = as_image(s_lin);
    for (const auto& b : blocks_) h = leaky_relu(b.forward(h), T(0.2));
    Tensor<T> phi = mean_over_h(proj_conv_.forward(h));       // {4c, L}
    Tensor<T> psi = cond_conv_.forward(mel);                  // {4c, L}
    DiscOutput<T> out;
    out.base_term = head_.forward(mean_over_hw(h));
    out.proj_term = inner_sum(phi, psi);
    out.logit = add(out.base_term, out.proj_term);
    return out;
  }

  // Joint primal/tangent pass: the tangent stream carries the directional
  // derivative of the logit along (dS, dM), built from recorded ops so its
  // graph reaches the discriminator parameters. Parameters have zero tangent;
  // the leaky-relu tangent mask is the a.e. derivative, held constant.
  struct DualOutput {
    DiscOutput<T> out;
    Tensor<T> logit_tangent;
  };

  DualOutput forward_dual(const Tensor<T>& s_lin, const Tensor<T>& mel,
                          const Tensor<T>& ds, const Tensor<T>& dm) const {
    validate(s_lin, mel);
    if (ds.shape() != s_lin.shape() || dm.shape() != mel.shape())
      throw ShapeError("disc: tangent shape mismatch");
    Tensor<T> h = as_image(s_lin);
    Tensor<T> dh = as_image(ds);
    for (const auto& b : blocks_) {
      Tensor<T> pre = b.forward(h);
      Tensor<T> dpre = b.forward_tangent(dh);
      std::vector<T> mask(pre.numel());
      for (size_t i = 0; i < mask.size(); ++i)
        mask[i] = pre.data()[i] > 0 ? T(1) : T(0.2);
      h = leaky_relu(pre, T(0.2));
      dh = mul_const(dpre, mask);
    }
    Tensor<T> phi = mean_over_h(proj_conv_.forward(h));
    Tensor<T> dphi = mean_over_h(proj_conv_.forward_tangent(dh));
    Tensor<T> psi = cond_conv_.forward(mel);
    Tensor<T> dpsi = conv1d<T>(dm, cond_conv_.w, std::nullopt, 1, Pad::Same);

    DualOutput dual;
    dual.out.base_term = head_.forward(mean_over_hw(h));
    dual.out.proj_term = inner_sum(phi, psi);
    dual.out.logit = add(dual.out.base_term, dual.out.proj_term);
    Tensor<T> dbase = head_.forward_tangent(mean_over_hw(dh));
    Tensor<T> dproj = add(inner_sum(dphi, psi), inner_sum(phi, dpsi));
    dual.logit_tangent = add(dbase, dproj);
    return dual;
  }

  void set_params_requires_grad(bool rg) {
    for (auto& p : params_) p.impl()->requires_grad = rg;
  }

 private:
  static Tensor<T> as_image(const Tensor<T>& s) {
    // {H, W} reinterpreted as a one-channel {1, H, W} image
    size_t n = s.numel();
    auto* ns = s.impl();
    return detail::make_op<T>({1, s.dim(0), s.dim(1)},
                              std::vector<T>(s.data(), s.data() + n), {s},
                              [ns, n](TensorNode<T>& self) {
                                if (!ns->requires_grad) return;
                                detail::accumulate(*ns, self.grad.data(), n);
                              });
  }

  void validate(const Tensor<T>& s_lin, const Tensor<T>& mel) const {
    if (s_lin.ndim() != 2 || s_lin.dim(0) != cfg_.lin_bins)
      throw ShapeError("disc: spectrogram must be {513, 4L}");
    if (mel.ndim() != 2 || mel.dim(0) != cfg_.mel_bins)
      throw ShapeError("disc: condition must be {80, L}");
    if (s_lin.dim(1) != 4 * mel.dim(1))
      throw ShapeError("disc: time mismatch, expected linear frames = 4 x mel frames");
    if (s_lin.dim(1) % 4 != 0)
      throw ShapeError("disc: linear frame count must be divisible by 4");
  }

  NetConfig cfg_;
  std::vector<Conv2dLayer<T>> blocks_;
  Conv2dLayer<T> proj_conv_;
  Conv1dLayer<T> cond_conv_;
  LinearLayer<T> head_;
  std::vector<Tensor<T>> params_;
};

// R1 gradient penalty, Eq.-4 style: gamma/2 * ||grad_{(M,S)} D||^2 on a real
// pair, with a gradient path into the discriminator parameters built as
// gamma * <grad_x D, stop_grad(g)> - gamma/2 * ||g||^2, whose value and
// parameter gradient both match the penalty at the evaluation point.
// `wrt_condition` controls whether the mel condition joins the norm.
template <typename T, typename D>
Tensor<T> r1_penalty(D& disc, const Tensor<T>& mel, const Tensor<T>& s_lin,
                     T gamma, bool wrt_condition = true) {
  if (gamma < 0) throw ValueError("r1_penalty: gamma must be >= 0");
  if (!mel.is_leaf() || mel.requires_grad() || !s_lin.is_leaf() ||
      s_lin.requires_grad())
    throw ValueError(
        "r1_penalty: inputs must be detached real samples, not generator outputs");
  if (gamma == 0) return Tensor<T>::scalar(T(0));

  // input gradients, parameters fenced off
  Tensor<T> m_in = mel.detach();
  Tensor<T> s_in = s_lin.detach();
  m_in.set_requires_grad(true);
  s_in.set_requires_grad(true);
  disc.set_params_requires_grad(false);
  Tensor<T> grad_s, grad_m;
  try {
    auto out = disc.forward(s_in, m_in);
    out.logit.backward();
    grad_s = Tensor<T>::from_data(s_in.shape(),
                                  s_in.has_grad() ? s_in.grad()
                                                  : std::vector<T>(s_in.numel(), T(0)));
    grad_m = wrt_condition && m_in.has_grad()
                 ? Tensor<T>::from_data(m_in.shape(), m_in.grad())
                 : Tensor<T>::zeros(m_in.shape());
  } catch (...) {
    disc.set_params_requires_grad(true);
    throw;
  }
  disc.set_params_requires_grad(true);

  double gnorm2 = 0.0;
  for (size_t i = 0; i < grad_s.numel(); ++i)
    gnorm2 += static_cast<double>(grad_s.data()[i]) * grad_s.data()[i];
  for (size_t i = 0; i < grad_m.numel(); ++i)
    gnorm2 += static_cast<double>(grad_m.data()[i]) * grad_m.data()[i];

  auto dual = disc.forward_dual(s_lin.detach(), mel.detach(), grad_s, grad_m);
  return add(scale(dual.logit_tangent, gamma),
             Tensor<T>::scalar(static_cast<T>(-0.5 * gamma * gnorm2)));
}

template <typename T>
struct AdvLosses {
  Tensor<T> disc;  // L_adv_D including the penalty term
  Tensor<T> gen;   // L_adv_G
};

// Standard non-saturating vanilla-GAN objectives by default: the
// discriminator maximizes log sigma(real) + log(1 - sigma(fake)) and the
// generator maximizes log sigma(fake). `literal_eq5` switches the fake-side
// signs to the variant printed in the source equation.
template <typename T>
AdvLosses<T> adv_losses(const std::vector<Tensor<T>>& logits_real,
                        const std::vector<Tensor<T>>& logits_fake,
                        const Tensor<T>& r1_term, bool literal_eq5 = false) {
  if (logits_real.empty() || logits_fake.empty())
    throw ValueError("adv_losses: empty batch");
  // mean of f(sign * t); each call builds fresh nodes so the two losses can
  // run backward independently
  auto mean_f = [](const std::vector<Tensor<T>>& v, T sign) {
    Tensor<T> s;
    for (size_t i = 0; i < v.size(); ++i) {
      Tensor<T> fi = f_gan(sign == T(1) ? v[i] : scale(v[i], sign));
      s = i == 0 ? fi : add(s, fi);
    }
    return scale(s, static_cast<T>(1.0 / static_cast<double>(v.size())));
  };
  AdvLosses<T> out;
  if (literal_eq5) {
    out.disc = add(scale(add(mean_f(logits_real, T(1)), mean_f(logits_fake, T(1))),
                         T(-1)),
                   r1_term);
    out.gen = mean_f(logits_fake, T(1));
  } else {
    out.disc = add(scale(add(mean_f(logits_real, T(1)), mean_f(logits_fake, T(-1))),
                         T(-1)),
                   r1_term);
    out.gen = scale(mean_f(logits_fake, T(1)), T(-1));
  }
  return out;
}

}  // namespace svs
