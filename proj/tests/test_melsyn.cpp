#include <catch2/catch_amalgamated.hpp>

#include "svs/melsyn.hpp"
#include "test_util.hpp"

using namespace svs;
using svs::testutil::random_tensor;

namespace {
NetConfig tiny_cfg() {
  NetConfig c;
  c.d_model = 8;
  c.text_enc_dilations = {1, 2};
  c.audio_enc_dilations = {1, 2};
  c.audio_dec_dilations = {1, 2};
  c.mask_dec_dilations = {1};
  c.sr_dilations = {1};
  c.disc_channels = 2;
  return c;
}

std::vector<int> rand_text(Rng& rng, int n) {
  std::vector<int> ids(static_cast<size_t>(n));
  for (auto& id : ids) id = rng.uniform_int(0, PhonemeVocab::kSize - 1);
  return ids;
}

std::vector<int> rand_pitch(Rng& rng, int n) {
  std::vector<int> ids(static_cast<size_t>(n));
  for (auto& id : ids) id = rng.uniform_int(36, 84);
  return ids;
}
}  // namespace

TEST_CASE("encoders produce {d, L} outputs and survive PAD input", "[melsyn]") {
  Rng rng(1);
  ParamStore<float> ps;
  MelSynNet<float> net(ps, tiny_cfg(), rng);
  RunMode mode;
  for (int L : {1, 5, 12}) {
    std::vector<int> pad(static_cast<size_t>(L), PhonemeVocab::kPad);
    auto enc = net.encode_text(pad, mode);
    REQUIRE(enc.key.shape() == std::vector<int>{8, L});
    REQUIRE(enc.value.shape() == std::vector<int>{8, L});
    REQUIRE_FALSE(enc.key.has_nonfinite());
    REQUIRE_FALSE(enc.value.has_nonfinite());
    std::vector<int> ppad(static_cast<size_t>(L), PitchVocab::kPad);
    auto pe = net.encode_pitch(ppad, mode);
    REQUIRE(pe.shape() == std::vector<int>{8, L});
    REQUIRE_FALSE(pe.has_nonfinite());
  }
  REQUIRE_THROWS_AS(net.encode_text({999}, mode), ValueError);
}

TEST_CASE("text encoder is translation equivariant away from edges", "[melsyn]") {
  Rng rng(2);
  ParamStore<float> ps;
  MelSynNet<float> net(ps, tiny_cfg(), rng);
  RunMode mode;
  int L = 48;
  Rng idrng(5);
  auto ids = rand_text(idrng, L);
  std::vector<int> shifted(ids.size(), PhonemeVocab::kPad);
  for (int t = 0; t + 1 < L; ++t) shifted[static_cast<size_t>(t) + 1] = ids[static_cast<size_t>(t)];
  auto a = net.encode_text(ids, mode);
  auto b = net.encode_text(shifted, mode);
  // receptive field of the tiny config is well under 12 frames
  for (int c = 0; c < 8; ++c)
    for (int t = 12; t < L - 12; ++t)
      REQUIRE(b.value.values()[static_cast<size_t>(c) * L + t + 1] ==
              Catch::Approx(a.value.values()[static_cast<size_t>(c) * L + t]).margin(1e-6));
}

TEST_CASE("mask identity: mel == mask .* dm bitwise", "[melsyn]") {
  Rng rng(3);
  ParamStore<float> ps;
  MelSynNet<float> net(ps, tiny_cfg(), rng);
  RunMode mode;
  Rng idrng(7);
  for (int trial = 0; trial < 5; ++trial) {
    int L = idrng.uniform_int(2, 10);
    auto mel_prev = random_tensor<float>({80, L}, idrng, 0, 1);
    auto out = net.forward(rand_text(idrng, L), rand_pitch(idrng, L), mel_prev, mode);
    REQUIRE(out.mel.shape() == std::vector<int>{80, L});
    for (size_t i = 0; i < out.mel.numel(); ++i)
      REQUIRE(out.mel.values()[i] == out.mask.values()[i] * out.dm.values()[i]);
  }
}

TEST_CASE("mask and dm force hooks", "[melsyn]") {
  Rng rng(4);
  ParamStore<float> ps;
  MelSynNet<float> net(ps, tiny_cfg(), rng);
  RunMode mode;
  Rng idrng(8);
  int L = 6;
  auto mel_prev = random_tensor<float>({80, L}, idrng, 0, 1);
  auto text = rand_text(idrng, L);
  auto pitch = rand_pitch(idrng, L);

  MelSynForce f1;
  f1.mask_one = true;
  auto out1 = net.forward(text, pitch, mel_prev, mode, f1);
  REQUIRE(out1.mel.values() == out1.dm.values());

  MelSynForce f2;
  f2.dm_zero = true;
  auto out2 = net.forward(text, pitch, mel_prev, mode, f2);
  for (float v : out2.mel.values()) REQUIRE(v == 0.0f);
}

TEST_CASE("attention columns sum to one", "[melsyn]") {
  Rng rng(5);
  ParamStore<float> ps;
  MelSynNet<float> net(ps, tiny_cfg(), rng);
  RunMode mode;
  Rng idrng(9);
  int L = 7;
  auto out = net.forward(rand_text(idrng, L), rand_pitch(idrng, L),
                         random_tensor<float>({80, L}, idrng, 0, 1), mode);
  REQUIRE(out.attn.shape() == std::vector<int>{L, L});
  for (int t = 0; t < L; ++t) {
    float s = 0;
    for (int n = 0; n < L; ++n) s += out.attn.values()[static_cast<size_t>(n) * L + t];
    REQUIRE(s == Catch::Approx(1.0f).margin(1e-5));
  }
}

TEST_CASE("future mel frames cannot affect past outputs", "[melsyn]") {
  Rng rng(6);
  ParamStore<float> ps;
  MelSynNet<float> net(ps, tiny_cfg(), rng);
  RunMode mode;
  Rng idrng(10);
  int L = 10;
  auto text = rand_text(idrng, L);
  auto pitch = rand_pitch(idrng, L);
  auto base = random_tensor<float>({80, L}, idrng, 0, 1);
  auto out0 = net.forward(text, pitch, base, mode);
  for (int t : {3, 7}) {
    auto perturbed = base.detach();
    for (int b = 0; b < 80; ++b)
      perturbed.data()[static_cast<size_t>(b) * L + t] += 10.0f;
    auto out1 = net.forward(text, pitch, perturbed, mode);
    for (int b = 0; b < 80; ++b)
      for (int u = 0; u < t; ++u)
        REQUIRE(out1.mel.values()[static_cast<size_t>(b) * L + u] ==
                out0.mel.values()[static_cast<size_t>(b) * L + u]);
  }
}

TEST_CASE("length mismatch raises", "[melsyn]") {
  Rng rng(7);
  ParamStore<float> ps;
  MelSynNet<float> net(ps, tiny_cfg(), rng);
  RunMode mode;
  Rng idrng(11);
  REQUIRE_THROWS_AS(net.forward(rand_text(idrng, 4), rand_pitch(idrng, 5),
                                random_tensor<float>({80, 4}, idrng, 0, 1), mode),
                    ShapeError);
  REQUIRE_THROWS_AS(net.forward(rand_text(idrng, 4), rand_pitch(idrng, 4),
                                random_tensor<float>({80, 6}, idrng, 0, 1), mode),
                    ShapeError);
}

TEST_CASE("melsyn_loss hand values", "[melsyn]") {
  MelSynOutput<float> out;
  out.mel = TensorF::from_data({1, 2}, {0.5f, 0.5f});
  out.mask = TensorF::full({1, 2}, 1.0f);
  out.dm = out.mel;
  out.attn = TensorF::from_data({2, 2}, {0.5f, 0.5f, 0.5f, 0.5f});
  auto target = TensorF::from_data({1, 2}, {0.0f, 1.0f});
  auto l = melsyn_loss(out, target);
  REQUIRE(l.l1.item() == Catch::Approx(0.5f));
  // diff sequences: target' = [0, 1]; mel' = [0.5, 0]; mean |.| = 0.75
  REQUIRE(l.l1_diff.item() == Catch::Approx(0.75f));
  REQUIRE(l.ld.item() > 0.0f);
  REQUIRE(l.latt.item() >= 0.0f);
  REQUIRE(l.total.item() == Catch::Approx(l.l1.item() + l.ld.item() +
                                          l.latt.item() + l.l1_diff.item()));

  // identical prediction: both L1 terms vanish
  MelSynOutput<float> same = out;
  same.mel = target;
  auto l2 = melsyn_loss(same, target);
  REQUIRE(l2.l1.item() == 0.0f);
  REQUIRE(l2.l1_diff.item() == 0.0f);

  auto bad = TensorF::from_data({1, 2}, {0.0f, 1.5f});
  REQUIRE_THROWS_AS(melsyn_loss(out, bad), ValueError);
}

TEST_CASE("diagonal attention has zero guided-attention mass", "[melsyn]") {
  int L = 4;
  MelSynOutput<float> out;
  out.mel = TensorF::full({1, L}, 0.5f);
  out.mask = TensorF::full({1, L}, 1.0f);
  out.dm = out.mel;
  auto eye = TensorF::zeros({L, L});
  for (int i = 0; i < L; ++i) eye.data()[static_cast<size_t>(i) * L + i] = 1.0f;
  out.attn = eye;
  auto target = TensorF::full({1, L}, 0.5f);
  auto l = melsyn_loss(out, target);
  REQUIRE(l.latt.item() == 0.0f);
}

TEST_CASE("full melsyn loss passes the gradient check", "[melsyn][gradcheck]") {
  Rng rng(12);
  ParamStore<double> ps;
  NetConfig cfg = tiny_cfg();
  MelSynNet<double> net(ps, cfg, rng);
  RunMode mode;
  Rng idrng(13);
  int L = 4;
  auto text = rand_text(idrng, L);
  auto pitch = rand_pitch(idrng, L);
  auto mel_prev = random_tensor<double>({80, L}, idrng, 0.05, 0.95);
  auto target = random_tensor<double>({80, L}, idrng, 0.05, 0.95);

  auto loss_fn = [&] {
    auto out = net.forward(text, pitch, mel_prev, mode);
    return melsyn_loss(out, target).total;
  };
  REQUIRE(grad_check(loss_fn, mel_prev) < 1e-4);
  REQUIRE(grad_check(loss_fn, ps.at("melsyn.maskdec.out.w")) < 1e-4);
  REQUIRE(grad_check(loss_fn, ps.at("melsyn.meldec.hc0.cond0.w")) < 1e-4);
  REQUIRE(grad_check(loss_fn, ps.at("melsyn.textenc.emb.table")) < 1e-4);
}

TEST_CASE("autoregressive generation is causally consistent", "[melsyn]") {
  Rng rng(14);
  ParamStore<float> ps;
  MelSynNet<float> net(ps, tiny_cfg(), rng);
  Rng idrng(15);
  int L = 6;
  auto text = rand_text(idrng, L);
  auto pitch = rand_pitch(idrng, L);
  auto gen = synth_autoregressive(net, text, pitch, L);
  REQUIRE(gen.mel.shape() == std::vector<int>{80, L});

  // one full pass over the self-generated sequence reproduces it bitwise
  NoGradGuard ng;
  RunMode mode;
  auto full = net.forward(text, pitch, shift_right_time(gen.mel), mode);
  REQUIRE(full.mel.values() == gen.mel.values());

  // base case: a single step from the zero frame
  auto one = synth_autoregressive(net, text, pitch, 1);
  auto direct = net.forward(text, pitch, TensorF::zeros({80, 1}), mode);
  REQUIRE(one.mel.values() == direct.mel.values());
  REQUIRE_THROWS_AS(synth_autoregressive(net, text, pitch, 0), ValueError);
}

TEST_CASE("pitch input changes the prediction", "[melsyn]") {
  Rng rng(16);
  ParamStore<float> ps;
  MelSynNet<float> net(ps, tiny_cfg(), rng);
  RunMode mode;
  Rng idrng(17);
  int L = 6;
  auto text = rand_text(idrng, L);
  auto mel_prev = random_tensor<float>({80, L}, idrng, 0, 1);
  std::vector<int> p1(static_cast<size_t>(L), 60);
  std::vector<int> p2(static_cast<size_t>(L), 72);  // octave up
  auto a = net.forward(text, p1, mel_prev, mode);
  auto b = net.forward(text, p2, mel_prev, mode);
  double diff = 0;
  for (size_t i = 0; i < a.mel.numel(); ++i)
    diff += std::abs(static_cast<double>(a.mel.values()[i]) - b.mel.values()[i]);
  REQUIRE(diff / static_cast<double>(a.mel.numel()) > 0.0);
}

TEST_CASE("dropout makes training stochastic but inference deterministic", "[melsyn]") {
  Rng rng(18);
  ParamStore<float> ps;
  MelSynNet<float> net(ps, tiny_cfg(), rng);
  Rng idrng(19);
  int L = 5;
  auto text = rand_text(idrng, L);
  auto pitch = rand_pitch(idrng, L);
  auto mel_prev = random_tensor<float>({80, L}, idrng, 0, 1);

  Rng d1(100), d2(100), d3(101);
  RunMode t1{true, &d1}, t2{true, &d2}, t3{true, &d3};
  auto o1 = net.forward(text, pitch, mel_prev, t1);
  auto o2 = net.forward(text, pitch, mel_prev, t2);
  auto o3 = net.forward(text, pitch, mel_prev, t3);
  REQUIRE(o1.mel.values() == o2.mel.values());   // same dropout stream
  REQUIRE(o1.mel.values() != o3.mel.values());   // different stream

  RunMode inf;
  auto i1 = net.forward(text, pitch, mel_prev, inf);
  auto i2 = net.forward(text, pitch, mel_prev, inf);
  REQUIRE(i1.mel.values() == i2.mel.values());
}
