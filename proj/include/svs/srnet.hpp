#pragma once

#include <string>
#include <vector>

#include "svs/melsyn.hpp"

namespace svs {

// Text and pitch branches for local conditioning at fine resolution: each is
// coarse {d, L} -> nearest-neighbor repeat x4 -> 1x1 conv -> dropout,
// giving {d, 4L}. The 2L-stage views are stride-2 subsamples of the same
// features (the 1x1 conv is pointwise, so this equals computing it at 2L).
template <typename T>
struct ConditioningFeatures {
  Tensor<T> text, pitch;        // {d, 4L}
  Tensor<T> text_2l, pitch_2l;  // {d, 2L}
};

template <typename T>
struct SROutput {
  Tensor<T> s_hat;   // {513, 4L}, strictly inside (0, 1)
  Tensor<T> logits;  // pre-sigmoid, kept for the binary divergence loss
};

// Upsamples an 80-band coarse mel to a 513-bin linear magnitude, x4 in time
// through two stride-1/2 transposed convolutions, with text/pitch features
// entering the highway blocks after each upsampling stage.
template <typename T>
class SRNet {
 public:
  SRNet(ParamStore<T>& ps, const NetConfig& cfg, Rng& rng,
        const std::string& prefix = "sr")
      : cfg_(cfg) {
    int d = cfg.d_model;
    in_ = Conv1dLayer<T>(ps, prefix + ".in", cfg.mel_bins, d, 1, 1, Pad::Same, rng);
    for (size_t i = 0; i < cfg.sr_dilations.size(); ++i)
      hc0_.emplace_back(ps, prefix + ".hc0_" + std::to_string(i), d, 3,
                        cfg.sr_dilations[i], Pad::Same, rng);
    up1_ = ConvTranspose1dX2Layer<T>(ps, prefix + ".up1", d, d, rng);
    for (size_t i = 0; i < cfg.sr_dilations.size(); ++i)
      hc1_.emplace_back(ps, prefix + ".hc1_" + std::to_string(i), d, 3,
                        cfg.sr_dilations[i], Pad::Same, rng,
                        std::vector<int>{d, d});
    up2_ = ConvTranspose1dX2Layer<T>(ps, prefix + ".up2", d, d, rng);
    for (size_t i = 0; i < cfg.sr_dilations.size(); ++i)
      hc2_.emplace_back(ps, prefix + ".hc2_" + std::to_string(i), d, 3,
                        cfg.sr_dilations[i], Pad::Same, rng,
                        std::vector<int>{d, d});
    cond_text_ = Conv1dLayer<T>(ps, prefix + ".cond_text", d, d, 1, 1, Pad::Same, rng);
    cond_pitch_ = Conv1dLayer<T>(ps, prefix + ".cond_pitch", d, d, 1, 1, Pad::Same, rng);
    mid_ = Conv1dLayer<T>(ps, prefix + ".mid", d, d, 1, 1, Pad::Same, rng);
    out_ = Conv1dLayer<T>(ps, prefix + ".out", d, cfg.lin_bins, 1, 1, Pad::Same, rng);
  }

  const NetConfig& config() const { return cfg_; }

  // Repeat-then-convolve conditioning branch (one encoding -> {d, 4L}).
  Tensor<T> upsample_conditioning(const Tensor<T>& enc, const Conv1dLayer<T>& proj,
                                  const RunMode& mode) const {
    Tensor<T> up = repeat4_time(enc);
    up = proj.forward(up);
    return drop(up, mode);
  }

  ConditioningFeatures<T> make_conditioning(const TextEncoding<T>& text,
                                            const Tensor<T>& pitch_enc,
                                            const RunMode& mode) const {
    ConditioningFeatures<T> c;
    c.text = upsample_conditioning(text.value, cond_text_, mode);
    c.pitch = upsample_conditioning(pitch_enc, cond_pitch_, mode);
    c.text_2l = subsample2_time(c.text);
    c.pitch_2l = subsample2_time(c.pitch);
    return c;
  }

  // use_conditioning=false reproduces the unconditioned ablation: the highway
  // pre-activations receive no conditioning term at all.
  SROutput<T> forward(const Tensor<T>& mel, const ConditioningFeatures<T>& cond,
                      const RunMode& mode, bool use_conditioning = true) const {
    if (mel.ndim() != 2 || mel.dim(0) != cfg_.mel_bins)
      throw ShapeError("sr: input must be {80, L}");
    int L = mel.dim(1);
    if (use_conditioning &&
        (cond.text.dim(1) != 4 * L || cond.pitch.dim(1) != 4 * L))
      throw ShapeError("sr: conditioning length must be 4L");

    Tensor<T> h = in_.forward(mel);
    for (const auto& hc : hc0_) h = drop(hc.forward(h), mode);
    h = up1_.forward(h);
    for (const auto& hc : hc1_)
      h = drop(use_conditioning ? hc.forward(h, {cond.text_2l, cond.pitch_2l})
                                : forward_unconditioned(hc, h),
               mode);
    h = up2_.forward(h);
    for (const auto& hc : hc2_)
      h = drop(use_conditioning ? hc.forward(h, {cond.text, cond.pitch})
                                : forward_unconditioned(hc, h),
               mode);
    h = relu(mid_.forward(h));
    SROutput<T> out;
    out.logits = out_.forward(h);
    out.s_hat = sigmoid(out.logits);
    return out;
  }

 private:
  // Same block, conditioning projections skipped entirely.
  static Tensor<T> forward_unconditioned(const HighwayConv1dLayer<T>& hc,
                                         const Tensor<T>& x) {
    Tensor<T> pre = conv1d<T>(x, hc.w, hc.b, hc.dilation, hc.pad);
    Tensor<T> gate = slice_rows(pre, 0, hc.d);
    Tensor<T> cand = slice_rows(pre, hc.d, 2 * hc.d);
    return highway_forward(x, cand, gate);
  }

  Tensor<T> drop(const Tensor<T>& x, const RunMode& mode) const {
    if (!mode.train || cfg_.dropout <= 0.0) return x;
    if (!mode.rng) throw ValueError("sr: training mode requires an rng");
    return dropout(x, cfg_.dropout, *mode.rng, true);
  }

  NetConfig cfg_;
  Conv1dLayer<T> in_, cond_text_, cond_pitch_, mid_, out_;
  std::vector<HighwayConv1dLayer<T>> hc0_, hc1_, hc2_;
  ConvTranspose1dX2Layer<T> up1_, up2_;
};

template <typename T>
struct SRLosses {
  Tensor<T> l1, ld, total;
};

// L_SR = L1(S_hat, S) + L_d(S_hat, S); the divergence uses the kept logits.
template <typename T>
SRLosses<T> sr_loss(const SROutput<T>& out, const Tensor<T>& target) {
  if (out.s_hat.shape() != target.shape())
    throw ShapeError("sr_loss: target shape mismatch");
  SRLosses<T> l;
  l.l1 = l1_loss(out.s_hat, target);
  l.ld = bce_with_logits(out.logits, target);
  l.total = add(l.l1, l.ld);
  return l;
}

}  // namespace svs
