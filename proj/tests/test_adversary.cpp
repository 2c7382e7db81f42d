#include <catch2/catch_amalgamated.hpp>

#include "svs/adversary.hpp"
#include "test_util.hpp"

using namespace svs;
using svs::testutil::random_tensor;

namespace {
NetConfig tiny_cfg() {
  NetConfig c;
  c.d_model = 8;
  c.disc_channels = 2;
  return c;
}
}  // namespace

TEST_CASE("f_gan values and stability", "[adversary]") {
  REQUIRE(f_gan(TensorF::scalar(0.0f)).item() == Catch::Approx(-std::log(2.0f)));
  float f40 = f_gan(TensorF::scalar(40.0f)).item();
  REQUIRE(f40 <= 0.0f);
  REQUIRE(f40 > -1e-15f);
  REQUIRE(f_gan(TensorF::scalar(-40.0f)).item() == Catch::Approx(-40.0f).margin(1e-4));
  float prev = -1e30f;
  for (float t : {-1e4f, -100.0f, -1.0f, 0.0f, 1.0f, 100.0f, 1e4f}) {
    float v = f_gan(TensorF::scalar(t)).item();
    REQUIRE(std::isfinite(v));
    REQUIRE(v > prev);
    REQUIRE((v < 0.0f || t >= 1e4f));
    prev = v;
  }
}

TEST_CASE("discriminator logit decomposition holds bitwise", "[adversary]") {
  Rng rng(1);
  ParamStore<float> ps;
  Discriminator<float> disc(ps, tiny_cfg(), rng);
  Rng drng(2);
  for (int trial = 0; trial < 5; ++trial) {
    int L = drng.uniform_int(2, 6);
    auto s = random_tensor<float>({513, 4 * L}, drng, 0, 1);
    auto m = random_tensor<float>({80, L}, drng, 0, 1);
    auto out = disc.forward(s, m);
    REQUIRE(out.logit.item() == out.base_term.item() + out.proj_term.item());
  }
  auto s = random_tensor<float>({513, 12}, drng, 0, 1);
  auto m = random_tensor<float>({80, 4}, drng, 0, 1);
  REQUIRE_THROWS_AS(disc.forward(s, m), ShapeError);
}

TEST_CASE("zeroed condition path reproduces the unconditional logit", "[adversary]") {
  Rng rng(3);
  ParamStore<float> ps;
  Discriminator<float> disc(ps, tiny_cfg(), rng);
  Rng drng(4);
  auto s = random_tensor<float>({513, 16}, drng, 0, 1);
  auto m = random_tensor<float>({80, 4}, drng, 0, 1);
  auto before = disc.forward(s, m);

  for (const std::string& name : {"disc.cond.w", "disc.cond.b"}) {
    Tensor<float> t = ps.at(name);
    std::fill(t.data(), t.data() + t.numel(), 0.0f);
  }
  auto after = disc.forward(s, m);
  REQUIRE(after.proj_term.item() == 0.0f);
  REQUIRE(after.logit.item() == before.base_term.item());
}

TEST_CASE("swapping the condition moves only the projection term", "[adversary]") {
  Rng rng(5);
  ParamStore<float> ps;
  Discriminator<float> disc(ps, tiny_cfg(), rng);
  Rng drng(6);
  auto s = random_tensor<float>({513, 16}, drng, 0, 1);
  auto m1 = random_tensor<float>({80, 4}, drng, 0, 1);
  auto m2 = random_tensor<float>({80, 4}, drng, 0, 1);
  auto a = disc.forward(s, m1);
  auto b = disc.forward(s, m2);
  REQUIRE(a.base_term.item() == b.base_term.item());
  REQUIRE(a.proj_term.item() != b.proj_term.item());
}

// Minimal linear discriminator used to pin the analytic R1 value.
template <typename T>
struct LinearDisc {
  Tensor<T> ws, wm, bias;

  LinearDisc(ParamStore<T>& ps, std::vector<int> s_shape, std::vector<int> m_shape,
             Rng& rng) {
    ws = ps.create("lin.ws", random_tensor<T>(s_shape, rng));
    wm = ps.create("lin.wm", random_tensor<T>(m_shape, rng));
    bias = ps.create("lin.b", Tensor<T>::zeros({1}));
  }

  struct Out {
    Tensor<T> logit;
  };
  Out forward(const Tensor<T>& s, const Tensor<T>& m) const {
    return {add(add(inner_sum(ws, s), inner_sum(wm, m)), sum_all(bias))};
  }
  struct DualOut {
    Out out;
    Tensor<T> logit_tangent;
  };
  DualOut forward_dual(const Tensor<T>& s, const Tensor<T>& m, const Tensor<T>& ds,
                       const Tensor<T>& dm) const {
    return {forward(s, m), add(inner_sum(ws, ds), inner_sum(wm, dm))};
  }
  void set_params_requires_grad(bool rg) {
    ws.impl()->requires_grad = rg;
    wm.impl()->requires_grad = rg;
    bias.impl()->requires_grad = rg;
  }
};

TEST_CASE("r1 penalty matches the analytic value for a linear discriminator",
          "[adversary]") {
  Rng rng(7);
  ParamStore<double> ps;
  LinearDisc<double> disc(ps, {16, 8}, {4, 8}, rng);
  Rng drng(8);
  auto s = random_tensor<double>({16, 8}, drng, 0, 1);
  auto m = random_tensor<double>({4, 8}, drng, 0, 1);
  double expect = 0;
  for (size_t i = 0; i < disc.ws.numel(); ++i)
    expect += disc.ws.values()[i] * disc.ws.values()[i];
  for (size_t i = 0; i < disc.wm.numel(); ++i)
    expect += disc.wm.values()[i] * disc.wm.values()[i];
  double gamma = 10.0;
  auto pen = r1_penalty(disc, m, s, gamma);
  REQUIRE(pen.item() == Catch::Approx(0.5 * gamma * expect).epsilon(1e-9));

  // sample-only variant drops the condition part of the norm
  double expect_s = 0;
  for (size_t i = 0; i < disc.ws.numel(); ++i)
    expect_s += disc.ws.values()[i] * disc.ws.values()[i];
  auto pen_s = r1_penalty(disc, m, s, gamma, false);
  REQUIRE(pen_s.item() == Catch::Approx(0.5 * gamma * expect_s).epsilon(1e-9));

  REQUIRE(r1_penalty(disc, m, s, 0.0).item() == 0.0);
}

TEST_CASE("r1 penalty is zero for a constant discriminator", "[adversary]") {
  Rng rng(9);
  ParamStore<float> ps;
  Discriminator<float> disc(ps, tiny_cfg(), rng);
  for (const auto& [name, t] : ps.items()) {
    Tensor<float> h = t;
    std::fill(h.data(), h.data() + h.numel(), 0.0f);
  }
  Rng drng(10);
  auto s = random_tensor<float>({513, 16}, drng, 0, 1);
  auto m = random_tensor<float>({80, 4}, drng, 0, 1);
  REQUIRE(r1_penalty(disc, m, s, 10.0f).item() == 0.0f);
}

TEST_CASE("r1 rejects graph-attached samples", "[adversary]") {
  Rng rng(11);
  ParamStore<float> ps;
  Discriminator<float> disc(ps, tiny_cfg(), rng);
  Rng drng(12);
  auto s_leaf = random_tensor<float>({513, 16}, drng, 0, 1);
  auto m = random_tensor<float>({80, 4}, drng, 0, 1);
  auto src = random_tensor<float>({513, 16}, drng, 0, 1);
  src.set_requires_grad(true);
  auto s_attached = scale(src, 2.0f);  // pretend generator output
  REQUIRE_THROWS_AS(r1_penalty(disc, m, s_attached, 10.0f), ValueError);
  REQUIRE_NOTHROW(r1_penalty(disc, m, s_leaf, 10.0f));
}

TEST_CASE("r1 parameter gradients match finite differences of the penalty",
          "[adversary][gradcheck]") {
  Rng rng(13);
  ParamStore<double> ps;
  NetConfig cfg = tiny_cfg();
  Discriminator<double> disc(ps, cfg, rng);
  Rng drng(14);
  auto s = random_tensor<double>({513, 8}, drng, 0, 1);
  auto m = random_tensor<double>({80, 2}, drng, 0, 1);
  double gamma = 10.0;

  ps.zero_grad();
  auto pen = r1_penalty(disc, m, s, gamma);
  pen.backward();

  // spot-check several parameters against central differences of the
  // penalty value itself
  for (const std::string& name :
       {"disc.b1.w", "disc.b5.w", "disc.proj.w", "disc.cond.w", "disc.head.w"}) {
    Tensor<double> p = ps.at(name);
    double analytic = p.has_grad() ? p.grad()[p.numel() / 2] : 0.0;
    double eps = 1e-5;
    size_t idx = p.numel() / 2;
    double orig = p.data()[idx];
    p.data()[idx] = orig + eps;
    double fp = r1_penalty(disc, m, s, gamma).item();
    p.data()[idx] = orig - eps;
    double fm = r1_penalty(disc, m, s, gamma).item();
    p.data()[idx] = orig;
    double fd = (fp - fm) / (2 * eps);
    INFO(name);
    REQUIRE(analytic == Catch::Approx(fd).margin(1e-5));
  }
}

TEST_CASE("adversarial loss values", "[adversary]") {
  auto zs = [] { return std::vector<TensorF>{TensorF::scalar(0.0f), TensorF::scalar(0.0f)}; };
  auto r0 = TensorF::scalar(0.0f);
  auto l = adv_losses(zs(), zs(), r0);
  REQUIRE(l.disc.item() == Catch::Approx(2.0f * std::log(2.0f)));
  REQUIRE(l.gen.item() == Catch::Approx(std::log(2.0f)));

  // the literal form flips the fake-side signs
  auto ll = adv_losses(zs(), zs(), r0, true);
  REQUIRE(ll.disc.item() == Catch::Approx(2.0f * std::log(2.0f)));
  REQUIRE(ll.gen.item() == Catch::Approx(-std::log(2.0f)));

  // a perfect discriminator drives its loss to zero
  std::vector<TensorF> real{TensorF::scalar(40.0f)};
  std::vector<TensorF> fake{TensorF::scalar(-40.0f)};
  auto lp = adv_losses(real, fake, r0);
  REQUIRE(lp.disc.item() == Catch::Approx(0.0f).margin(1e-6));

  REQUIRE_THROWS_AS(adv_losses(std::vector<TensorF>{}, fake, r0), ValueError);
}

TEST_CASE("one adversarial step improves each side against a frozen opponent",
          "[adversary]") {
  NetConfig cfg = tiny_cfg();
  Rng rng(15);
  ParamStore<float> ps;
  Discriminator<float> disc(ps, cfg, rng);
  AdamState<float> dstate;
  dstate.init(ps);
  AdamConfig opt;
  opt.lr = 1e-3;

  Rng drng(16);
  int L = 4;
  std::vector<TensorF> real_s, real_m, fake_s, fake_m;
  for (int i = 0; i < 2; ++i) {
    real_s.push_back(random_tensor<float>({513, 4 * L}, drng, 0.4, 1.0));
    real_m.push_back(random_tensor<float>({80, L}, drng, 0.4, 1.0));
    fake_s.push_back(random_tensor<float>({513, 4 * L}, drng, 0.0, 0.6));
    fake_m.push_back(random_tensor<float>({80, L}, drng, 0.0, 0.6));
  }

  auto disc_loss = [&] {
    std::vector<TensorF> lr, lf;
    for (int i = 0; i < 2; ++i) {
      lr.push_back(disc.forward(real_s[static_cast<size_t>(i)], real_m[static_cast<size_t>(i)]).logit);
      lf.push_back(disc.forward(fake_s[static_cast<size_t>(i)], fake_m[static_cast<size_t>(i)]).logit);
    }
    return adv_losses(lr, lf, TensorF::scalar(0.0f)).disc;
  };
  float before = disc_loss().item();
  ps.zero_grad();
  disc_loss().backward();
  adam_step(ps, dstate, opt);
  float after = disc_loss().item();
  REQUIRE(after < before);

  // generator side: the "generator" is the fake sample itself
  ParamStore<float> gen_ps;
  auto gs = gen_ps.create("gen.s", fake_s[0].detach());
  auto gm = gen_ps.create("gen.m", fake_m[0].detach());
  AdamState<float> gstate;
  gstate.init(gen_ps);
  auto gen_loss = [&] {
    std::vector<TensorF> lf{disc.forward(gs, gm).logit};
    std::vector<TensorF> lr{TensorF::scalar(0.0f)};
    return adv_losses(lr, lf, TensorF::scalar(0.0f)).gen;
  };
  float gbefore = gen_loss().item();
  gen_ps.zero_grad();
  gen_loss().backward();
  adam_step(gen_ps, gstate, opt);
  float gafter = gen_loss().item();
  REQUIRE(gafter < gbefore);
}
