#include <catch2/catch_amalgamated.hpp>

#include "svs/nn.hpp"

using namespace svs;

TEST_CASE("xavier bounds and determinism", "[nn]") {
  Rng r1(7), r2(7);
  // fan_in = fan_out = 3 -> bound sqrt(6/6) = 1
  auto a = xavier_init<float>({3, 3}, 3, 3, r1);
  for (size_t i = 0; i < a.numel(); ++i) {
    REQUIRE(a.data()[i] >= -1.0f);
    REQUIRE(a.data()[i] <= 1.0f);
  }
  auto b = xavier_init<float>({3, 3}, 3, 3, r2);
  REQUIRE(a.values() == b.values());
  REQUIRE_THROWS_AS(xavier_init<float>({1}, 0, 3, r1), ValueError);
}

TEST_CASE("xavier sample variance matches uniform formula", "[nn]") {
  // fan 600/600: a = sqrt(6/1200), variance a^2/3 ~ 1.667e-3
  Rng rng(123);
  auto t = xavier_init<double>({1000, 1000}, 600, 600, rng);
  double mean = 0;
  for (size_t i = 0; i < t.numel(); ++i) mean += t.data()[i];
  mean /= static_cast<double>(t.numel());
  double var = 0;
  for (size_t i = 0; i < t.numel(); ++i) {
    double d = t.data()[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(t.numel());
  double expected = (6.0 / 1200.0) / 3.0;
  REQUIRE(var > expected * 0.8);
  REQUIRE(var < expected * 1.2);
}

TEST_CASE("causal conv identity kernel", "[nn]") {
  // k=1 identity weights over 2 channels
  auto x = TensorF::from_data({2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
  auto w = TensorF::from_data({2, 2, 1}, {1, 0, 0, 1});
  auto y = causal_dilated_conv1d(x, w);
  REQUIRE(y.values() == x.values());
}

TEST_CASE("causal conv past tap", "[nn]") {
  // x=[1,2,3], k=2, w=[1,0] puts weight 1 on the past tap -> [0,1,2]
  auto x = TensorF::from_data({1, 3}, {1, 2, 3});
  auto w = TensorF::from_data({1, 1, 2}, {1, 0});
  auto y = causal_dilated_conv1d(x, w);
  REQUIRE(y.values() == std::vector<float>{0, 1, 2});
}

TEST_CASE("causal conv output is invariant to future frames", "[nn]") {
  Rng rng(3);
  auto make_x = [&](float future) {
    std::vector<float> v(2 * 10);
    Rng local(99);
    for (auto& e : v) e = static_cast<float>(local.uniform(-1, 1));
    v[2 * 10 - 1] = future;  // channel 1, last frame
    v[10 - 1] = future;      // channel 0, last frame
    return TensorF::from_data({2, 10}, v);
  };
  std::vector<float> wv(3 * 2 * 3);
  for (auto& e : wv) e = static_cast<float>(rng.uniform(-1, 1));
  auto w = TensorF::from_data({3, 2, 3}, wv);
  auto y1 = conv1d<float>(make_x(0.0f), w, std::nullopt, 2, Pad::Causal);
  auto y2 = conv1d<float>(make_x(100.0f), w, std::nullopt, 2, Pad::Causal);
  for (int c = 0; c < 3; ++c)
    for (int t = 0; t < 9; ++t)
      REQUIRE(y1.values()[c * 10 + t] == y2.values()[c * 10 + t]);
}

TEST_CASE("conv1d validation", "[nn]") {
  auto x = TensorF::zeros({2, 4});
  auto w = TensorF::zeros({3, 5, 3});  // channel mismatch
  REQUIRE_THROWS_AS(conv1d<float>(x, w, std::nullopt, 1, Pad::Causal), ShapeError);
  auto w2 = TensorF::zeros({3, 2, 3});
  REQUIRE_THROWS_AS(conv1d<float>(x, w2, std::nullopt, 0, Pad::Causal), ValueError);
}

TEST_CASE("conv gradients pass finite differences", "[nn][gradcheck]") {
  Rng rng(17);
  auto rand_tensor = [&](std::vector<int> shape) {
    auto t = TensorD::zeros(shape);
    for (size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-1, 1);
    return t;
  };
  auto x = rand_tensor({2, 6});
  auto w = rand_tensor({3, 2, 3});
  auto b = rand_tensor({3});
  auto mask = rand_tensor({3, 6});

  auto loss = [&] {
    std::optional<TensorD> bias(b);
    return sum_all(mul(conv1d<double>(x, w, bias, 2, Pad::Causal), mask));
  };
  REQUIRE(grad_check(loss, x) < 1e-6);
  REQUIRE(grad_check(loss, w) < 1e-6);
  REQUIRE(grad_check(loss, b) < 1e-6);

  auto loss_same = [&] {
    std::optional<TensorD> bias(b);
    return sum_all(mul(conv1d<double>(x, w, bias, 1, Pad::Same), mask));
  };
  REQUIRE(grad_check(loss_same, x) < 1e-6);
  REQUIRE(grad_check(loss_same, w) < 1e-6);

  auto wt = rand_tensor({3, 2, 2});
  auto mask12 = rand_tensor({3, 12});
  auto loss_t = [&] {
    std::optional<TensorD> bias(b);
    return sum_all(mul(conv_transpose1d_x2<double>(x, wt, bias), mask12));
  };
  REQUIRE(grad_check(loss_t, x) < 1e-6);
  REQUIRE(grad_check(loss_t, wt) < 1e-6);

  auto x2 = rand_tensor({2, 5, 6});
  auto w2 = rand_tensor({3, 2, 3, 3});
  auto b2 = rand_tensor({3});
  auto mask2 = rand_tensor({3, 3, 3});
  auto loss2 = [&] {
    std::optional<TensorD> bias(b2);
    return sum_all(mul(conv2d<double>(x2, w2, bias, 2, 2, 1, 1), mask2));
  };
  REQUIRE(grad_check(loss2, x2) < 1e-6);
  REQUIRE(grad_check(loss2, w2) < 1e-6);
  REQUIRE(grad_check(loss2, b2) < 1e-6);
}

TEST_CASE("transposed conv doubles time with repeat semantics", "[nn]") {
  auto x = TensorF::from_data({1, 2}, {1, 2});
  auto w = TensorF::from_data({1, 1, 2}, {1, 1});
  auto y = conv_transpose1d_x2<float>(x, w, std::nullopt);
  REQUIRE(y.values() == std::vector<float>{1, 1, 2, 2});
}

TEST_CASE("highway forward gating limits", "[nn]") {
  auto x = TensorF::from_data({1, 3}, {1, 2, 3});
  auto h = TensorF::from_data({1, 3}, {10, 20, 30});
  auto closed = TensorF::full({1, 3}, -1e6f);
  auto open = TensorF::full({1, 3}, 1e6f);
  auto half = TensorF::zeros({1, 3});
  REQUIRE(highway_forward(x, h, closed).values() == x.values());
  REQUIRE(highway_forward(x, h, open).values() == h.values());
  auto mid = highway_forward(x, h, half);
  REQUIRE(mid.values()[0] == Catch::Approx(5.5f));
  REQUIRE(mid.values()[2] == Catch::Approx(16.5f));
  auto bad = TensorF::zeros({1, 4});
  REQUIRE_THROWS_AS(highway_forward(x, h, bad), ShapeError);
}

TEST_CASE("highway gradcheck", "[nn][gradcheck]") {
  Rng rng(5);
  auto rand_tensor = [&](std::vector<int> shape) {
    auto t = TensorD::zeros(shape);
    for (size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-1, 1);
    return t;
  };
  auto x = rand_tensor({2, 4});
  auto h = rand_tensor({2, 4});
  auto g = rand_tensor({2, 4});
  auto w = rand_tensor({2, 4});
  auto loss = [&] { return sum_all(mul(highway_forward(x, h, g), w)); };
  REQUIRE(grad_check(loss, x) < 1e-6);
  REQUIRE(grad_check(loss, h) < 1e-6);
  REQUIRE(grad_check(loss, g) < 1e-6);
}

TEST_CASE("embedding lookup and gradient", "[nn]") {
  auto table = TensorD::from_data({3, 2}, {0, 1, 10, 11, 20, 21});
  std::vector<int> ids{2, 0, 2};
  auto e = embedding(ids, table);
  REQUIRE(e.shape() == std::vector<int>{2, 3});
  REQUIRE(e.values() == std::vector<double>{20, 0, 20, 21, 1, 21});
  REQUIRE_THROWS_AS(embedding({3}, table), ValueError);

  auto mask = TensorD::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  auto tbl = table;
  REQUIRE(grad_check([&] { return sum_all(mul(embedding(ids, tbl), mask)); }, tbl) <
          1e-6);
}

TEST_CASE("dropout behavior", "[nn]") {
  auto x = TensorF::full({4, 8}, 1.0f);
  Rng rng(9);
  auto y = dropout(x, 0.5, rng, true);
  bool any_zero = false, any_scaled = false;
  for (size_t i = 0; i < y.numel(); ++i) {
    if (y.values()[i] == 0.0f) any_zero = true;
    if (y.values()[i] == 2.0f) any_scaled = true;
  }
  REQUIRE(any_zero);
  REQUIRE(any_scaled);
  // inference: bitwise identity
  auto z = dropout(x, 0.5, rng, false);
  REQUIRE(z.values() == x.values());
  REQUIRE_THROWS_AS(dropout(x, 1.0, rng, true), ValueError);
}

TEST_CASE("highway conv layer shapes and conditioning count", "[nn]") {
  ParamStore<float> ps;
  Rng rng(1);
  HighwayConv1dLayer<float> hc(ps, "hc", 4, 3, 1, Pad::Causal, rng, {2});
  auto x = TensorF::zeros({4, 6});
  auto cond = TensorF::zeros({2, 6});
  auto y = hc.forward(x, {cond});
  REQUIRE(y.shape() == std::vector<int>{4, 6});
  REQUIRE_THROWS_AS(hc.forward(x, {}), ShapeError);
  REQUIRE(ps.contains("hc.cond0.w"));
}
