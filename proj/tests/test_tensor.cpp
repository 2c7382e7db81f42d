#include <catch2/catch_amalgamated.hpp>

#include "svs/optim.hpp"
#include "svs/tensor.hpp"

using namespace svs;

TEST_CASE("tensor construction and basics", "[tensor]") {
  auto t = TensorF::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  REQUIRE(t.numel() == 6);
  REQUIRE(t.dim(0) == 2);
  REQUIRE(t.data()[5] == 6.0f);
  REQUIRE_THROWS_AS(TensorF::from_data({2, 2}, {1, 2, 3}), ShapeError);
  REQUIRE_THROWS_AS(TensorF::zeros({0, 3}), ShapeError);
}

TEST_CASE("scalar item only on scalars", "[tensor]") {
  auto t = TensorF::from_data({2}, {1, 2});
  REQUIRE_THROWS_AS(t.item(), ShapeError);
  REQUIRE(TensorF::scalar(4.0f).item() == 4.0f);
}

TEST_CASE("elementwise ops and backward", "[tensor]") {
  auto a = TensorD::from_data({3}, {1, 2, 3});
  auto b = TensorD::from_data({3}, {4, 5, 6});
  a.set_requires_grad();
  b.set_requires_grad();
  auto loss = sum_all(mul(a, b));
  REQUIRE(loss.item() == Catch::Approx(4 + 10 + 18));
  loss.backward();
  REQUIRE(a.grad() == std::vector<double>{4, 5, 6});
  REQUIRE(b.grad() == std::vector<double>{1, 2, 3});
}

TEST_CASE("grad accumulates when a tensor is reused", "[tensor]") {
  auto a = TensorD::from_data({2}, {3, 4});
  a.set_requires_grad();
  auto loss = sum_all(add(a, a));
  loss.backward();
  REQUIRE(a.grad() == std::vector<double>{2, 2});
}

TEST_CASE("no_grad suppresses graph construction", "[tensor]") {
  auto a = TensorD::from_data({2}, {1, 2});
  a.set_requires_grad();
  NoGradGuard ng;
  auto y = mul(a, a);
  REQUIRE_FALSE(y.requires_grad());
}

TEST_CASE("matmul against hand result", "[tensor]") {
  auto a = TensorD::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  auto b = TensorD::from_data({3, 2}, {7, 8, 9, 10, 11, 12});
  auto c = matmul(a, b);
  REQUIRE(c.values() == std::vector<double>{58, 64, 139, 154});
  // A^T path: (3,2)^T x (3,2) -> (2,2)
  auto at = TensorD::from_data({3, 2}, {1, 4, 2, 5, 3, 6});
  auto c2 = matmul_tn(at, b);
  REQUIRE(c2.values() == std::vector<double>{58, 64, 139, 154});
}

TEST_CASE("softmax columns sum to one", "[tensor]") {
  Rng rng(11);
  std::vector<double> vals(5 * 7);
  for (auto& v : vals) v = rng.uniform(-3, 3);
  auto x = TensorD::from_data({5, 7}, vals);
  auto y = softmax_cols(x);
  for (int j = 0; j < 7; ++j) {
    double s = 0;
    for (int i = 0; i < 5; ++i) s += y.values()[i * 7 + j];
    REQUIRE(s == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("gradient checks for core ops", "[tensor][gradcheck]") {
  Rng rng(42);
  auto rand_tensor = [&](std::vector<int> shape) {
    auto t = TensorD::zeros(shape);
    for (size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-1, 1);
    return t;
  };

  SECTION("mul/add/sub/scale") {
    auto x = rand_tensor({4, 5});
    auto other = rand_tensor({4, 5});
    REQUIRE(grad_check([&] { return sum_all(mul(x, other)); }, x) < 1e-6);
    REQUIRE(grad_check([&] { return mean_all(add(x, other)); }, x) < 1e-6);
    REQUIRE(grad_check([&] { return mean_all(sub(other, x)); }, x) < 1e-6);
    REQUIRE(grad_check([&] { return sum_all(scale(x, 2.5)); }, x) < 1e-6);
  }

  SECTION("sigmoid/relu-family/softplus") {
    auto x = rand_tensor({3, 4});
    // keep relu inputs away from the kink
    for (size_t i = 0; i < x.numel(); ++i)
      if (std::abs(x.data()[i]) < 0.05) x.data()[i] = 0.1;
    REQUIRE(grad_check([&] { return mean_all(sigmoid(x)); }, x) < 1e-6);
    REQUIRE(grad_check([&] { return mean_all(relu(x)); }, x) < 1e-6);
    REQUIRE(grad_check([&] { return mean_all(leaky_relu(x, 0.2)); }, x) < 1e-6);
    REQUIRE(grad_check([&] { return mean_all(softplus(x)); }, x) < 1e-6);
  }

  SECTION("matmul and softmax") {
    auto a = rand_tensor({3, 4});
    auto b = rand_tensor({4, 5});
    auto w = rand_tensor({3, 5});
    REQUIRE(grad_check([&] { return sum_all(mul(matmul(a, b), w)); }, a) < 1e-6);
    REQUIRE(grad_check([&] { return sum_all(mul(matmul(a, b), w)); }, b) < 1e-6);
    auto sm_in = rand_tensor({4, 3});
    auto sm_w = rand_tensor({4, 3});
    REQUIRE(grad_check([&] { return sum_all(mul(softmax_cols(sm_in), sm_w)); },
                       sm_in) < 1e-5);
  }

  SECTION("losses") {
    auto x = rand_tensor({4, 4});
    auto target = rand_tensor({4, 4});
    // keep L1 away from ties
    for (size_t i = 0; i < x.numel(); ++i)
      if (std::abs(x.data()[i] - target.data()[i]) < 0.05)
        x.data()[i] = target.data()[i] + 0.1;
    REQUIRE(grad_check([&] { return l1_loss(x, target); }, x) < 1e-6);

    auto probs_target = TensorD::zeros({4, 4});
    for (size_t i = 0; i < probs_target.numel(); ++i)
      probs_target.data()[i] = rng.uniform(0.1, 0.9);
    REQUIRE(grad_check([&] { return bce_with_logits(x, probs_target); }, x) < 1e-6);

    auto p = TensorD::zeros({4, 4});
    for (size_t i = 0; i < p.numel(); ++i) p.data()[i] = rng.uniform(0.1, 0.9);
    REQUIRE(grad_check([&] { return binary_divergence(p, probs_target); }, p) < 1e-6);

    std::vector<double> wmat(16);
    for (auto& v : wmat) v = rng.uniform(0, 1);
    REQUIRE(grad_check([&] { return weighted_mean(x, wmat); }, x) < 1e-6);
    REQUIRE(grad_check([&] { return inner_sum(x, target); }, x) < 1e-6);
  }

  SECTION("structural ops") {
    auto x = rand_tensor({3, 8});
    auto w8 = rand_tensor({3, 8});
    auto w32 = rand_tensor({3, 32});
    auto w4 = rand_tensor({3, 4});
    REQUIRE(grad_check([&] { return sum_all(mul(shift_right_time(x), w8)); }, x) < 1e-6);
    REQUIRE(grad_check([&] { return sum_all(mul(diff_time(x), w8)); }, x) < 1e-6);
    REQUIRE(grad_check([&] { return sum_all(mul(repeat4_time(x), w32)); }, x) < 1e-6);
    REQUIRE(grad_check([&] { return sum_all(mul(subsample2_time(x), w4)); }, x) < 1e-6);
    REQUIRE(grad_check([&] { return sum_all(mul(crop_time(x, 2, 6), w4)); }, x) < 1e-6);
    auto other = rand_tensor({2, 8});
    auto wcat = rand_tensor({5, 8});
    auto wslice = rand_tensor({2, 8});
    REQUIRE(grad_check([&] { return sum_all(mul(concat_rows(x, other), wcat)); }, x) < 1e-6);
    REQUIRE(grad_check([&] { return sum_all(mul(slice_rows(x, 1, 3), wslice)); }, x) < 1e-5);
  }

  SECTION("pooling") {
    auto x = rand_tensor({2, 3, 4});
    auto wc = rand_tensor({2});
    auto wcw = rand_tensor({2, 4});
    REQUIRE(grad_check([&] { return sum_all(mul(mean_over_hw(x), wc)); }, x) < 1e-6);
    REQUIRE(grad_check([&] { return sum_all(mul(mean_over_h(x), wcw)); }, x) < 1e-6);
  }
}

TEST_CASE("grad_check on quadratic matches hand analysis", "[gradcheck]") {
  auto x = TensorD::from_data({1}, {3.0});
  double err = grad_check([&] { return sum_all(mul(x, x)); }, x);
  REQUIRE(err < 1e-8);
  // analytic derivative is 6 at x=3
  x.zero_grad();
  auto loss = sum_all(mul(x, x));
  loss.backward();
  REQUIRE(x.grad()[0] == Catch::Approx(6.0));
}

TEST_CASE("grad_check rejects non-finite losses", "[gradcheck]") {
  auto x = TensorD::from_data({1}, {std::numeric_limits<double>::quiet_NaN()});
  REQUIRE_THROWS_AS(grad_check([&] { return sum_all(mul(x, x)); }, x),
                    NumericError);
}

TEST_CASE("nan detection", "[tensor]") {
  auto x = TensorF::from_data({2}, {1.0f, std::numeric_limits<float>::infinity()});
  REQUIRE(x.has_nonfinite());
  REQUIRE_THROWS_AS(x.check_finite("x"), NumericError);
  auto y = TensorF::from_data({2}, {1.0f, 2.0f});
  REQUIRE_FALSE(y.has_nonfinite());
}

TEST_CASE("backward frees the tape", "[tensor]") {
  auto x = TensorD::from_data({2}, {1, 2});
  x.set_requires_grad();
  auto y = mul(x, x);
  auto loss = sum_all(y);
  loss.backward();
  REQUIRE(y.impl()->parents.empty());
  REQUIRE_FALSE(static_cast<bool>(y.impl()->backprop));
}
