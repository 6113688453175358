#include <benchmark/benchmark.h>

#include "stepdad/bounds.hpp"
#include "stepdad/models.hpp"
#include "stepdad/policy.hpp"
#include "stepdad/rollout.hpp"
#include "stepdad/theta_source.hpp"

using namespace stepdad;

namespace {

History random_history(const Model& m, std::size_t t, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> theta(m.theta_dim());
  m.sample_prior(rng, theta, {});
  return rollout_history(m, DesignPolicy::random_for(m, seed), theta, History{}, t, rng);
}

void BM_PolicyForward(benchmark::State& state) {
  LocationFinding lf;
  Rng rng(1);
  const PolicyParams p = PolicyParams::build(default_policy_spec(lf), lf.design_dim(), rng);
  const History h = random_history(lf, static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(next_design(p, h));
}
BENCHMARK(BM_PolicyForward)->Arg(1)->Arg(5)->Arg(9);

void BM_PolicyForwardBackward(benchmark::State& state) {
  LocationFinding lf;
  Rng rng(1);
  const PolicyParams p = PolicyParams::build(default_policy_spec(lf), lf.design_dim(), rng);
  const History h = random_history(lf, static_cast<std::size_t>(state.range(0)), 2);
  const std::vector<double> g(lf.design_dim(), 1.0);
  for (auto _ : state) {
    const PolicyForward f = policy_forward(p, h);
    benchmark::DoNotOptimize(policy_backward(p, f, g));
  }
}
BENCHMARK(BM_PolicyForwardBackward)->Arg(1)->Arg(5)->Arg(9);

void BM_SpceGradient(benchmark::State& state) {
  LocationFinding lf;
  Rng rng(1);
  const PolicyParams p = PolicyParams::build(default_policy_spec(lf), lf.design_dim(), rng);
  GradientOptions g;
  g.T = 6;
  g.N = static_cast<std::size_t>(state.range(0));
  g.L = 127;
  for (auto _ : state) {
    ++g.seed;
    benchmark::DoNotOptimize(spce_gradient(lf, p, ThetaSource::prior(lf), {}, g).objective);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SpceGradient)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Bounds(benchmark::State& state) {
  LocationFinding lf;
  Rng rng(1);
  const PolicyParams p = PolicyParams::build(default_policy_spec(lf), lf.design_dim(), rng);
  BoundOptions o;
  o.T = 10;
  o.N = 64;
  o.L = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_bounds(lf, DesignPolicy::network(p), ThetaSource::prior(lf), {}, o).lower.value);
  }
}
BENCHMARK(BM_Bounds)->Arg(1023)->Arg(8191)->Unit(benchmark::kMillisecond);

void BM_ExactToyBounds(benchmark::State& state) {
  ToyModel toy(toy_preset("toy-design"));
  Rng rng(1);
  const PolicyParams p = PolicyParams::build(default_policy_spec(toy), 1, rng);
  BoundOptions o;
  o.T = static_cast<std::size_t>(state.range(0));
  o.exact = true;
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_bounds(toy, DesignPolicy::network(p), ThetaSource::prior(toy), {}, o).lower.value);
  }
}
BENCHMARK(BM_ExactToyBounds)->Arg(3)->Arg(6);

}  // namespace
BENCHMARK_MAIN();
