#pragma once

#include <string>
#include <vector>

#include "svs/adversary.hpp"
#include "svs/melsyn.hpp"
#include "svs/srnet.hpp"

namespace svs {

struct GradCheckResult {
  std::string name;
  double max_err = 0;
};

// Finite-difference verification of every differentiable op plus the full
// composite losses, in double precision on toy shapes.
inline std::vector<GradCheckResult> run_gradcheck_suite(double eps = 1e-5) {
  std::vector<GradCheckResult> results;
  Rng rng(1234);
  auto rand_t = [&](std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
    TensorD t = TensorD::zeros(std::move(shape));
    for (size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
  };
  auto run = [&](const std::string& name, auto f, TensorD& x) {
    results.push_back({name, grad_check(f, x, eps)});
  };

  {  // elementwise
    auto x = rand_t({4, 5});
    auto y = rand_t({4, 5});
    auto w = rand_t({4, 5});
    run("add", [&] { return sum_all(mul(add(x, y), w)); }, x);
    run("sub", [&] { return sum_all(mul(sub(x, y), w)); }, x);
    run("mul", [&] { return sum_all(mul(mul(x, y), w)); }, x);
    run("scale", [&] { return sum_all(mul(scale(x, 1.7), w)); }, x);
    run("sigmoid", [&] { return sum_all(mul(sigmoid(x), w)); }, x);
    run("softplus", [&] { return sum_all(mul(softplus(x), w)); }, x);
    auto xr = rand_t({4, 5});
    for (size_t i = 0; i < xr.numel(); ++i)
      if (std::abs(xr.data()[i]) < 0.05) xr.data()[i] = 0.1;
    run("relu", [&] { return sum_all(mul(relu(xr), w)); }, xr);
    run("leaky_relu", [&] { return sum_all(mul(leaky_relu(xr, 0.2), w)); }, xr);
  }
  {  // reductions and losses
    auto x = rand_t({4, 4}, 0.1, 0.9);
    auto t = rand_t({4, 4}, 0.1, 0.9);
    for (size_t i = 0; i < x.numel(); ++i)
      if (std::abs(x.data()[i] - t.data()[i]) < 0.02) x.data()[i] += 0.05;
    run("mean_all", [&] { return mean_all(x); }, x);
    run("sum_all", [&] { return sum_all(x); }, x);
    run("l1_loss", [&] { return l1_loss(x, t); }, x);
    run("bce_with_logits", [&] { return bce_with_logits(x, t); }, x);
    run("binary_divergence", [&] { return binary_divergence(x, t); }, x);
    run("inner_sum", [&] { return inner_sum(x, t); }, x);
    std::vector<double> w = guided_attention_weights<double>(4, 4, 0.2);
    run("guided_attention_mean", [&] { return weighted_mean(x, w); }, x);
  }
  {  // matrix ops
    auto a = rand_t({3, 4});
    auto b = rand_t({4, 5});
    auto w = rand_t({3, 5});
    run("matmul.a", [&] { return sum_all(mul(matmul(a, b), w)); }, a);
    run("matmul.b", [&] { return sum_all(mul(matmul(a, b), w)); }, b);
    auto at = rand_t({4, 3});
    run("matmul_tn", [&] { return sum_all(mul(matmul_tn(at, b), w)); }, at);
    auto sm = rand_t({5, 4});
    auto smw = rand_t({5, 4});
    run("attention_softmax", [&] { return sum_all(mul(softmax_cols(sm), smw)); }, sm);
  }
  {  // structure
    auto x = rand_t({3, 8});
    auto w8 = rand_t({3, 8});
    auto w32 = rand_t({3, 32});
    auto w4 = rand_t({3, 4});
    auto other = rand_t({2, 8});
    auto wcat = rand_t({5, 8});
    run("shift_right_time", [&] { return sum_all(mul(shift_right_time(x), w8)); }, x);
    run("diff_time", [&] { return sum_all(mul(diff_time(x), w8)); }, x);
    run("repeat4_time", [&] { return sum_all(mul(repeat4_time(x), w32)); }, x);
    run("subsample2_time", [&] { return sum_all(mul(subsample2_time(x), w4)); }, x);
    run("crop_time", [&] { return sum_all(mul(crop_time(x, 2, 6), w4)); }, x);
    run("concat_rows", [&] { return sum_all(mul(concat_rows(x, other), wcat)); }, x);
    run("slice_rows", [&] { return sum_all(mul(slice_rows(x, 1, 3), other)); }, x);
  }
  {  // pooling
    auto x = rand_t({2, 4, 5});
    auto wc = rand_t({2});
    auto wcw = rand_t({2, 5});
    run("mean_over_hw", [&] { return sum_all(mul(mean_over_hw(x), wc)); }, x);
    run("mean_over_h", [&] { return sum_all(mul(mean_over_h(x), wcw)); }, x);
  }
  {  // convolutions and layers
    auto x = rand_t({2, 6});
    auto w = rand_t({3, 2, 3});
    auto b = rand_t({3});
    auto m = rand_t({3, 6});
    std::optional<TensorD> bias(b);
    run("causal_dilated_conv1d.x",
        [&] { return sum_all(mul(conv1d<double>(x, w, bias, 2, Pad::Causal), m)); }, x);
    run("causal_dilated_conv1d.w",
        [&] { return sum_all(mul(conv1d<double>(x, w, bias, 2, Pad::Causal), m)); }, w);
    run("conv1d_same.w",
        [&] { return sum_all(mul(conv1d<double>(x, w, bias, 1, Pad::Same), m)); }, w);
    auto wt = rand_t({3, 2, 2});
    auto m12 = rand_t({3, 12});
    run("conv_transpose1d_x2",
        [&] { return sum_all(mul(conv_transpose1d_x2<double>(x, wt, bias), m12)); }, wt);
    auto x2 = rand_t({2, 6, 8});
    auto w2 = rand_t({3, 2, 3, 3});
    auto m2 = rand_t({3, 3, 4});
    std::optional<TensorD> nob;
    run("conv2d_strided",
        [&] { return sum_all(mul(conv2d<double>(x2, w2, nob, 2, 2, 1, 1), m2)); }, w2);
    auto table = rand_t({6, 3});
    std::vector<int> ids{0, 5, 2, 5};
    auto me = rand_t({3, 4});
    run("embedding", [&] { return sum_all(mul(embedding(ids, table), me)); }, table);
    auto v = rand_t({5});
    auto lw = rand_t({3, 5});
    auto lb = rand_t({3});
    auto lm = rand_t({3});
    std::optional<TensorD> lbias(lb);
    run("linear", [&] { return sum_all(mul(linear(v, lw, lbias), lm)); }, lw);
    auto hx = rand_t({2, 4});
    auto hh = rand_t({2, 4});
    auto hg = rand_t({2, 4});
    auto hw = rand_t({2, 4});
    run("highway.x", [&] { return sum_all(mul(highway_forward(hx, hh, hg), hw)); }, hx);
    run("highway.gate", [&] { return sum_all(mul(highway_forward(hx, hh, hg), hw)); }, hg);
    auto dx = rand_t({3, 5});
    auto dw = rand_t({3, 5});
    run("dropout",
        [&] {
          Rng drng(55);  // same mask on every evaluation
          return sum_all(mul(dropout(dx, 0.3, drng, true), dw));
        },
        dx);
  }

  NetConfig cfg;
  cfg.d_model = 8;
  cfg.text_enc_dilations = {1, 2};
  cfg.audio_enc_dilations = {1, 2};
  cfg.audio_dec_dilations = {1, 2};
  cfg.mask_dec_dilations = {1};
  cfg.sr_dilations = {1};
  cfg.disc_channels = 2;

  {  // full mel-synthesis loss
    Rng init(77);
    ParamStore<double> ps;
    MelSynNet<double> net(ps, cfg, init);
    RunMode mode;
    Rng drng(78);
    int L = 4;
    std::vector<int> text(L), pitch(L);
    for (auto& id : text) id = static_cast<int>(drng.next_below(PhonemeVocab::kSize));
    for (auto& id : pitch) id = 36 + static_cast<int>(drng.next_below(49));
    auto mel_prev = rand_t({80, L}, 0.05, 0.95);
    auto target = rand_t({80, L}, 0.05, 0.95);
    auto loss = [&] {
      return melsyn_loss(net.forward(text, pitch, mel_prev, mode), target).total;
    };
    run("L_MS.mel_prev", loss, mel_prev);
    run("L_MS.meldec_hc_w", loss, ps.at("melsyn.meldec.hc0.w"));
    run("L_MS.mask_out_w", loss, ps.at("melsyn.maskdec.out.w"));
    run("L_MS.text_emb", loss, ps.at("melsyn.textenc.emb.table"));
    run("L_MS.pitch_cond", loss, ps.at("melsyn.meldec.hc0.cond0.w"));
  }
  {  // full super-resolution loss
    Rng init(79);
    ParamStore<double> ps;
    SRNet<double> sr(ps, cfg, init);
    RunMode mode;
    int L = 3;
    auto mel = rand_t({80, L}, 0.05, 0.95);
    ConditioningFeatures<double> cond;
    cond.text = rand_t({8, 4 * L});
    cond.pitch = rand_t({8, 4 * L});
    cond.text_2l = subsample2_time(cond.text).detach();
    cond.pitch_2l = subsample2_time(cond.pitch).detach();
    auto target = rand_t({513, 4 * L}, 0.05, 0.95);
    auto loss = [&] { return sr_loss(sr.forward(mel, cond, mode), target).total; };
    run("L_SR.mel", loss, mel);
    run("L_SR.up1_w", loss, ps.at("sr.up1.w"));
    run("L_SR.cond_proj", loss, ps.at("sr.hc2_0.cond0.w"));
    run("L_SR.out_w", loss, ps.at("sr.out.w"));
  }
  {  // generator adversarial loss through the discriminator
    Rng init(80);
    ParamStore<double> gen_ps, disc_ps;
    MelSynNet<double> ms(gen_ps, cfg, init);
    SRNet<double> sr(gen_ps, cfg, init);
    Discriminator<double> disc(disc_ps, cfg, init);
    RunMode mode;
    Rng drng(81);
    int L = 4;
    std::vector<int> text(L), pitch(L);
    for (auto& id : text) id = static_cast<int>(drng.next_below(PhonemeVocab::kSize));
    for (auto& id : pitch) id = 36 + static_cast<int>(drng.next_below(49));
    auto mel_prev = rand_t({80, L}, 0.05, 0.95);
    auto loss = [&] {
      auto out = ms.forward(text, pitch, mel_prev, mode);
      auto cond = sr.make_conditioning(out.text, out.pitch_enc, mode);
      auto srout = sr.forward(out.mel, cond, mode);
      auto logit = disc.forward(srout.s_hat, out.mel).logit;
      return scale(f_gan(logit), -1.0);
    };
    run("L_advG.meldec_w", loss, gen_ps.at("melsyn.meldec.out.w"));
    run("L_advG.sr_out_w", loss, gen_ps.at("sr.out.w"));
    run("L_advG.audioenc_hc", loss, gen_ps.at("melsyn.audioenc.hc0.w"));
  }
  return results;
}

}  // namespace svs
