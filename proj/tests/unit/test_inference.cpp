#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "stepdad/errors.hpp"
#include "stepdad/inference.hpp"
#include "stepdad/models.hpp"

using namespace stepdad;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<Theta> scalar_thetas(std::size_t n) {
  std::vector<Theta> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i].values = {static_cast<double>(i)};
  return t;
}

History linear_history(const LinearGaussian& lg, const std::vector<double>& xs, const std::vector<double>& ys) {
  History h;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    RawDesign raw{{xs[i]}};
    h.push_back({raw, constrain_design(lg, raw), Outcome{ys[i], OutcomeKind::kGaussian}});
  }
  return h;
}

}  // namespace

TEST_CASE("importance sampling matches the conjugate normal posterior") {
  LinearGaussianSpec spec;
  spec.prior_mean = 0.5;
  spec.prior_sd = 1.2;
  spec.noise_sd = 0.8;
  LinearGaussian lg(spec);
  const std::vector<double> xs{1.0, -0.5, 2.0};
  const std::vector<double> ys{0.9, -0.2, 1.7};
  const History h = linear_history(lg, xs, ys);

  double prec = 1.0 / (spec.prior_sd * spec.prior_sd);
  double num = spec.prior_mean * prec;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    prec += xs[i] * xs[i] / (spec.noise_sd * spec.noise_sd);
    num += xs[i] * ys[i] / (spec.noise_sd * spec.noise_sd);
  }
  const double post_mean = num / prec;
  const double post_sd = 1.0 / std::sqrt(prec);

  Rng rng(2024);
  const auto post = fit_posterior_is(lg, h, 100000, rng);
  CHECK(post.size() == 100000);
  CHECK(post.tau == 3);
  double mean = 0.0;
  for (std::size_t i = 0; i < post.size(); ++i) mean += post.weights[i] * post.thetas[i].values[0];
  const double se = post_sd / std::sqrt(post.effective_sample_size);
  CHECK(std::abs(mean - post_mean) < 3 * se);

  const auto summary = summarize(lg, post);
  CHECK(summary.mean[0] == doctest::Approx(mean).epsilon(1e-12));
  CHECK(std::abs(summary.q50[0] - post_mean) < 0.05);
  CHECK(summary.q05[0] < summary.q50[0]);
  CHECK(summary.q50[0] < summary.q95[0]);
}

TEST_CASE("ess identities") {
  const auto uniform = ParticlePosterior::from_log_weights(scalar_thetas(64), std::vector<double>(64, -3.7), 0);
  CHECK(ess(uniform) == doctest::Approx(64.0).epsilon(1e-13));
  CHECK(uniform.effective_sample_size == doctest::Approx(64.0).epsilon(1e-13));

  std::vector<double> lw(64, kNegInf);
  lw[17] = 12.0;
  const auto degenerate = ParticlePosterior::from_log_weights(scalar_thetas(64), lw, 0);
  CHECK(ess(degenerate) == 1.0);
  CHECK(degenerate.weights[17] == 1.0);
  CHECK(degenerate.cumulative.back() == doctest::Approx(1.0));

  // Two equal weights, the rest negligible.
  std::vector<double> two(10, kNegInf);
  two[1] = two[4] = 0.0;
  CHECK(ess(ParticlePosterior::from_log_weights(scalar_thetas(10), two, 0)) == doctest::Approx(2.0));
}

TEST_CASE("invalid log weights are rejected") {
  CHECK_THROWS_AS(ParticlePosterior::from_log_weights(scalar_thetas(3), std::vector<double>(3, kNegInf), 0),
                  NumericError);
  CHECK_THROWS_AS(ParticlePosterior::from_log_weights(scalar_thetas(3), {0.0, std::nan(""), 0.0}, 0), NumericError);
}

TEST_CASE("large log weights normalize without overflow") {
  const auto p = ParticlePosterior::from_log_weights(scalar_thetas(2), {1000.0, 1000.0 + std::log(3.0)}, 0);
  CHECK(p.weights[0] == doctest::Approx(0.25));
  CHECK(p.weights[1] == doctest::Approx(0.75));
  CHECK(p.draw_index(0.2) == 0);
  CHECK(p.draw_index(0.3) == 1);
}

TEST_CASE("resampling frequencies follow the weights") {
  const auto p = ParticlePosterior::from_log_weights(scalar_thetas(3),
                                                     {std::log(0.2), std::log(0.5), std::log(0.3)}, 0);
  Rng rng(8);
  const std::size_t n = 50000;
  const auto draws = resample(p, n, rng);
  double counts[3] = {};
  for (const auto& t : draws) counts[static_cast<int>(t.values[0])] += 1.0;
  const double probs[3] = {0.2, 0.5, 0.3};
  for (int i = 0; i < 3; ++i) {
    const double se = std::sqrt(probs[i] * (1 - probs[i]) / n);
    CHECK(std::abs(counts[i] / n - probs[i]) < 4 * se);
  }
}

TEST_CASE("posterior csv has one row per particle") {
  LinearGaussian lg;
  const auto p = ParticlePosterior::from_log_weights(scalar_thetas(4), std::vector<double>(4, 0.0), 1);
  std::ostringstream out;
  write_posterior_csv(out, lg, p);
  const std::string s = out.str();
  CHECK(std::count(s.begin(), s.end(), '\n') == 5);
}
