#include <doctest.h>

#include <cmath>
#include <vector>

#include "stepdad/bounds.hpp"
#include "stepdad/enumerate.hpp"
#include "stepdad/errors.hpp"
#include "stepdad/finite_diff.hpp"
#include "stepdad/models.hpp"
#include "stepdad/theta_source.hpp"

using namespace stepdad;

namespace {

// I(theta; y_1..T) for the design-free channel p(y = theta) = q, uniform
// prior over two atoms, by direct summation over outcome sequences.
double channel_eig(int T, double q) {
  double eig = 0.0;
  for (int mask = 0; mask < (1 << T); ++mask) {
    double lik[2];
    for (int theta = 0; theta < 2; ++theta) {
      lik[theta] = 1.0;
      for (int t = 0; t < T; ++t) lik[theta] *= (((mask >> t) & 1) == theta) ? q : 1 - q;
    }
    const double marginal = 0.5 * (lik[0] + lik[1]);
    for (double l : lik) eig += 0.5 * l * std::log(l / marginal);
  }
  return eig;
}

PolicyParams tiny_policy(std::size_t design_dim, std::uint64_t seed) {
  PolicySpec s;
  s.encoder_hidden = {4};
  s.representation = 3;
  s.decoder_hidden = {4};
  s.activation = Activation::kSoftplus;
  Rng rng(seed);
  return PolicyParams::build(s, design_dim, rng);
}

History step_history(const Model& model, const std::vector<double>& raws, const std::vector<double>& ys) {
  History h;
  for (std::size_t i = 0; i < raws.size(); ++i) {
    RawDesign raw{{raws[i]}};
    h.push_back({raw, constrain_design(model, raw), Outcome{ys[i], model.outcome_kind()}});
  }
  return h;
}

}  // namespace

TEST_CASE("exact bounds equal the enumerated channel information") {
  ToyModel toy;
  const auto p = tiny_policy(1, 1);
  const auto policy = DesignPolicy::network(p);
  const auto src = ThetaSource::prior(toy);
  const double h09 = -(0.9 * std::log(0.9) + 0.1 * std::log(0.1));
  CHECK(channel_eig(1, 0.9) == doctest::Approx(std::log(2.0) - h09).epsilon(1e-15));
  for (std::size_t T = 1; T <= 3; ++T) {
    BoundOptions o;
    o.T = T;
    o.exact = true;
    const auto b = estimate_bounds(toy, policy, src, {}, o);
    CHECK(std::abs(b.lower.value - channel_eig(static_cast<int>(T), 0.9)) < 1e-10);
    CHECK(std::abs(b.upper.value - channel_eig(static_cast<int>(T), 0.9)) < 1e-10);
    CHECK(b.lower.exact);
    const auto table = toy_enumerate(toy, designer_for(policy), T);
    CHECK(std::abs(exact_eig(table) - channel_eig(static_cast<int>(T), 0.9)) < 1e-10);
  }
}

TEST_CASE("exact bounds with static designs match a hand enumeration") {
  ToyModel toy(toy_preset("toy-design"));
  const double w1 = 0.3, w2 = 0.8;
  Tensor raw = Tensor::matrix(2, 1);
  raw(0, 0) = std::log(w1 / (1 - w1));
  raw(1, 0) = std::log(w2 / (1 - w2));
  const auto policy = DesignPolicy::fixed(raw);
  const double A[2][2] = {{0.9, 0.1}, {0.1, 0.9}};
  const double B[2][2] = {{0.6, 0.4}, {0.3, 0.7}};
  auto p = [&](int th, double w, int y) { return w * A[th][y] + (1 - w) * B[th][y]; };
  double eig = 0.0;
  for (int y1 = 0; y1 < 2; ++y1) {
    for (int y2 = 0; y2 < 2; ++y2) {
      const double l0 = p(0, w1, y1) * p(0, w2, y2), l1 = p(1, w1, y1) * p(1, w2, y2);
      const double m = 0.5 * (l0 + l1);
      eig += 0.5 * l0 * std::log(l0 / m) + 0.5 * l1 * std::log(l1 / m);
    }
  }
  BoundOptions o;
  o.T = 2;
  o.exact = true;
  const auto b = estimate_bounds(toy, policy, ThetaSource::prior(toy), {}, o);
  CHECK(std::abs(b.lower.value - eig) < 1e-12);
  CHECK(b.lower.kind == BoundKind::kPce);
}

TEST_CASE("theta-independent likelihood gives zero information") {
  ToyModel toy(toy_preset("toy-null"));
  const auto p = tiny_policy(1, 2);
  BoundOptions o;
  o.T = 3;
  o.exact = true;
  const auto exact = estimate_bounds(toy, DesignPolicy::network(p), ThetaSource::prior(toy), {}, o);
  CHECK(std::abs(exact.lower.value) < 1e-14);
  o.exact = false;
  o.N = 500;
  o.L = 15;
  const auto sampled = estimate_bounds(toy, DesignPolicy::network(p), ThetaSource::prior(toy), {}, o);
  CHECK(std::abs(sampled.lower.value) < 1e-12);
  CHECK(std::abs(sampled.upper.value) < 1e-12);
}

TEST_CASE("a complete prefix leaves nothing to learn") {
  ToyModel toy;
  const auto p = tiny_policy(1, 3);
  const History h = step_history(toy, {0.0, 1.0}, {0.0, 1.0});
  BoundOptions o;
  o.T = 2;
  o.N = 10;
  o.L = 3;
  const auto b = estimate_bounds(toy, DesignPolicy::network(p), ThetaSource::prior(toy), h, o);
  CHECK(b.lower.value == 0.0);
  CHECK(b.upper.value == 0.0);
  CHECK(b.lower.tau == 2);
  o.T = 1;
  CHECK_THROWS_AS(estimate_bounds(toy, DesignPolicy::network(p), ThetaSource::prior(toy), h, o), DimensionError);
}

TEST_CASE("exact bounds from a prefix weight theta by the source") {
  ToyModel toy;
  const auto p = tiny_policy(1, 4);
  const History h = step_history(toy, {0.2}, {1.0});
  const auto post = exact_posterior(toy, toy.prior_atoms(), h);
  REQUIRE(post.size() == 2);
  CHECK(post[1].mass == doctest::Approx(0.9));
  // Remaining information about theta from two more channel uses under the
  // posterior (0.1, 0.9).
  double eig = 0.0;
  for (int mask = 0; mask < 4; ++mask) {
    double lik[2];
    for (int th = 0; th < 2; ++th) {
      lik[th] = 1.0;
      for (int t = 0; t < 2; ++t) lik[th] *= (((mask >> t) & 1) == th) ? 0.9 : 0.1;
    }
    const double m = 0.1 * lik[0] + 0.9 * lik[1];
    eig += 0.1 * lik[0] * std::log(lik[0] / m) + 0.9 * lik[1] * std::log(lik[1] / m);
  }
  BoundOptions o;
  o.T = 3;
  o.exact = true;
  const auto b = estimate_bounds(toy, DesignPolicy::network(p), ThetaSource::prior(toy), h, o);
  const auto bp = estimate_bounds(toy, DesignPolicy::network(p), ThetaSource::perturbed(toy, {0.0, {0.1, 0.9}}),
                                  h, o);
  CHECK(std::abs(bp.lower.value - eig) < 1e-12);
  // The prefix only fixes the designs; theta stays distributed as the source says.
  CHECK(std::abs(b.lower.value - channel_eig(2, 0.9)) < 1e-12);
}

TEST_CASE("sampled bounds bracket the linear gaussian information") {
  LinearGaussian lg;
  Tensor raw = Tensor::matrix(2, 1);
  raw(0, 0) = 1.5;
  raw(1, 0) = -0.5;
  const double eig = 0.5 * std::log(1.0 + 1.5 * 1.5 + 0.5 * 0.5);
  const auto policy = DesignPolicy::fixed(raw);
  BoundOptions o;
  o.T = 2;
  o.N = 4000;
  o.seed = 7;
  double last_lower = -1e9, last_upper = 1e9;
  for (std::size_t L : {1, 7, 63, 511}) {
    o.L = L;
    const auto b = estimate_bounds(lg, policy, ThetaSource::prior(lg), {}, o);
    CAPTURE(L);
    CHECK(b.lower.value <= eig + 3 * b.lower.se);
    CHECK(b.upper.value >= eig - 3 * b.upper.se);
    CHECK(b.lower.value <= std::log(static_cast<double>(L + 1)) + 1e-12);
    CHECK(b.lower.value > last_lower);
    CHECK(b.upper.value < last_upper);
    last_lower = b.lower.value;
    last_upper = b.upper.value;
  }
  CHECK(std::abs(last_lower - eig) < 0.05);
  CHECK(std::abs(last_upper - eig) < 0.05);
}

TEST_CASE("bounds are deterministic in the seed") {
  LocationFinding lf;
  const auto p = tiny_policy(2, 5);
  BoundOptions o;
  o.T = 3;
  o.N = 64;
  o.L = 31;
  o.seed = 99;
  o.chunk = 16;
  const auto a = estimate_bounds(lf, DesignPolicy::network(p), ThetaSource::prior(lf), {}, o);
  o.chunk = 64;
  const auto b = estimate_bounds(lf, DesignPolicy::network(p), ThetaSource::prior(lf), {}, o);
  CHECK(a.lower_terms == b.lower_terms);
  CHECK(a.upper_terms == b.upper_terms);
  o.L = 0;
  CHECK_THROWS_AS(estimate_bounds(lf, DesignPolicy::network(p), ThetaSource::prior(lf), {}, o), ConfigError);
}

TEST_CASE("pathwise sPCE gradient matches finite differences") {
  LocationFinding lf;
  PolicyParams p = tiny_policy(2, 6);
  GradientOptions g;
  g.T = 2;
  g.N = 16;
  g.L = 7;
  g.seed = 3;
  const auto at = spce_gradient(lf, p, ThetaSource::prior(lf), {}, g);
  BoundOptions o;
  o.T = 2;
  o.N = 16;
  o.L = 7;
  o.seed = 3;
  CHECK(spce(lf, DesignPolicy::network(p), ThetaSource::prior(lf), {}, o).value ==
        doctest::Approx(at.objective).epsilon(1e-12));

  PolicyParams q = p;
  auto tensors = q.tensors();
  const auto analytic = flatten(at.grads.tensors());
  auto loss = [&](std::span<const double> flat, std::vector<double>* grad) {
    unflatten(flat, tensors);
    if (grad) *grad = analytic;
    return spce_gradient(lf, q, ThetaSource::prior(lf), {}, g).objective;
  };
  const auto report = finite_diff_check(loss, flatten(p.tensors()), 1e-6);
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    CAPTURE(i);
    CHECK(report.analytic[i] == doctest::Approx(report.numeric[i]).epsilon(1e-5).scale(1e-6));
  }
}

TEST_CASE("pathwise gradients need reparameterizable outcomes") {
  HyperbolicDiscounting htd;
  PolicyParams p = tiny_policy(2, 8);
  GradientOptions g;
  g.T = 2;
  g.N = 8;
  g.L = 3;
  g.mode = GradMode::kPathwise;
  CHECK_THROWS_AS(spce_gradient(htd, p, ThetaSource::prior(htd), {}, g), ConfigError);
  g.mode = GradMode::kScore;
  const auto r = spce_gradient(htd, p, ThetaSource::prior(htd), {}, g);
  CHECK(std::isfinite(r.objective));
  CHECK(default_grad_mode(htd) == GradMode::kScore);
  CHECK(default_grad_mode(LocationFinding{}) == GradMode::kPathwise);
}
