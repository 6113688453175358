#include <doctest.h>

#include <cmath>

#include "stepdad/errors.hpp"
#include "stepdad/finite_diff.hpp"
#include "stepdad/mlp.hpp"

using namespace stepdad;

namespace {

// <output, weights> as a scalar loss so every output coordinate matters.
double weighted_sum(const Tensor& out, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
  return s;
}

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t = Tensor::matrix(r, c);
  for (auto& v : t.values()) v = rng.normal();
  return t;
}

void check_mlp_gradients(const std::vector<LayerSpec>& specs, double tol) {
  Rng rng(11);
  MlpParams net = MlpParams::build(3, specs, rng);
  // Nudge layer-norm affine parameters off their identity initialization.
  for (auto& l : net.layers) {
    for (auto& v : l.ln_gain.values()) v += 0.3 * rng.normal();
    for (auto& v : l.ln_bias.values()) v += 0.3 * rng.normal();
  }
  const Tensor x = random_matrix(5, 3, rng);
  const Tensor w = random_matrix(5, net.out_dim(), rng);

  const MlpTrace trace = mlp_forward(net, x);
  MlpGradients g = mlp_backward(net, trace, w);

  const double h = 1e-6;
  auto params = net.tensors();
  auto grads = g.params.tensors();
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k]->size(); ++i) {
      const double orig = (*params[k])[i];
      (*params[k])[i] = orig + h;
      const double up = weighted_sum(mlp_forward(net, x).output(), w);
      (*params[k])[i] = orig - h;
      const double down = weighted_sum(mlp_forward(net, x).output(), w);
      (*params[k])[i] = orig;
      const double fd = (up - down) / (2 * h);
      CHECK((*grads[k])[i] == doctest::Approx(fd).epsilon(tol).scale(1.0));
    }
  }
  Tensor xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double up = weighted_sum(mlp_forward(net, xp).output(), w);
    xp[i] = x[i] - h;
    const double down = weighted_sum(mlp_forward(net, xp).output(), w);
    xp[i] = x[i];
    CHECK(g.input[i] == doctest::Approx((up - down) / (2 * h)).epsilon(tol).scale(1.0));
  }
}

}  // namespace

TEST_CASE("tensor shapes and element access") {
  Tensor m = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 2) == 6);
  const Tensor t = transpose(m);
  CHECK(t.rows() == 3);
  CHECK(t(2, 1) == 6);
  CHECK(t(0, 1) == 4);
  Tensor v = Tensor::vector(4, 2.0);
  CHECK(v.rows() == 1);
  CHECK(v.cols() == 4);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2, 2}).rows(), DimensionError);
}

TEST_CASE("tensor arithmetic rejects mismatched shapes") {
  Tensor a = Tensor::matrix(2, 2, 1.0);
  Tensor b = Tensor::matrix(2, 3, 1.0);
  CHECK_THROWS_AS(a += b, DimensionError);
  a *= 3.0;
  CHECK(a(1, 1) == 3.0);
}

TEST_CASE("dense forward matches a hand-computed affine map") {
  Rng rng(1);
  MlpParams net = MlpParams::build(2, {{2, Activation::kRelu}}, rng);
  net.layers[0].weight = Tensor::from_rows({{1.0, -2.0}, {0.5, 0.25}});
  net.layers[0].bias = Tensor::vector(2);
  net.layers[0].bias[0] = 0.1;
  net.layers[0].bias[1] = -3.0;
  const Tensor x = Tensor::from_rows({{2.0, 0.5}});
  const Tensor y = mlp_forward(net, x).output();
  CHECK(y(0, 0) == doctest::Approx(1.1));  // 2 - 1 + 0.1
  CHECK(y(0, 1) == 0.0);                    // relu(1 + 0.125 - 3)
}

TEST_CASE("mlp backward matches central differences") {
  SUBCASE("softplus stack") {
    check_mlp_gradients({{6, Activation::kSoftplus}, {4, Activation::kSigmoid}, {2, Activation::kIdentity}}, 1e-6);
  }
  SUBCASE("layer norm with relu") {
    check_mlp_gradients({{6, Activation::kRelu, true}, {3, Activation::kSoftplus, true}, {2}}, 1e-5);
  }
}

TEST_CASE("mlp rejects wrong input width") {
  Rng rng(2);
  MlpParams net = MlpParams::build(3, {{4, Activation::kRelu}}, rng);
  CHECK_THROWS_AS(mlp_forward(net, Tensor::matrix(2, 5)), DimensionError);
  MlpParams empty;
  CHECK_THROWS_AS(mlp_forward(empty, Tensor::matrix(2, 3)), DimensionError);
}

TEST_CASE("activation helpers") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(softplus(800.0) == doctest::Approx(800.0));
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(std::isfinite(sigmoid(-1000.0)));
  CHECK(activation_from_string("relu") == Activation::kRelu);
  CHECK_THROWS_AS(activation_from_string("tanhh"), ConfigError);
}

TEST_CASE("finite_diff_check flags a wrong gradient") {
  LossWithGradient good = [](std::span<const double> p, std::vector<double>* g) {
    if (g) *g = {2 * p[0], 3.0};
    return p[0] * p[0] + 3 * p[1];
  };
  LossWithGradient bad = [](std::span<const double> p, std::vector<double>* g) {
    if (g) *g = {p[0], 3.0};
    return p[0] * p[0] + 3 * p[1];
  };
  const std::vector<double> at{1.5, -0.5};
  CHECK(finite_diff_check(good, at).max_relative_error < 1e-8);
  const auto r = finite_diff_check(bad, at);
  CHECK(r.max_relative_error == doctest::Approx(0.5));
  CHECK(r.worst_index == 0);
}

TEST_CASE("flatten and unflatten round-trip") {
  Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  Tensor b = Tensor::vector(3, 7.0);
  std::vector<const Tensor*> in{&a, &b};
  auto flat = flatten(in);
  CHECK(flat.size() == 7);
  for (auto& v : flat) v *= 2;
  std::vector<Tensor*> out{&a, &b};
  unflatten(flat, out);
  CHECK(a(1, 1) == 8);
  CHECK(b[2] == 14);
  flat.pop_back();
  CHECK_THROWS_AS(unflatten(flat, out), DimensionError);
}
