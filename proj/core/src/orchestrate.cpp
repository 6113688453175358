#include "stepdad/orchestrate.hpp"

#include <cmath>
#include <sstream>

#include "json_fields.hpp"
#include "stepdad/errors.hpp"
#include "stepdad/log.hpp"

namespace stepdad {

namespace {

constexpr int kDivergenceRun = 10;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t step_seed(std::uint64_t seed, std::size_t step) { return mix_seed(seed, 0x7a11ULL + step); }

}  // namespace

void TrainConfig::validate() const {
  detail::require(batch >= 1, "train.batch must be >= 1");
  detail::require(contrasts >= 1, "train.contrasts must be >= 1");
  adam.validate();
}

TrainConfig default_train_config(const Model& model) {
  TrainConfig c;
  const std::string name = model.name();
  if (name == "location-finding") return c;
  if (name == "hyperbolic-discounting") {
    c.steps = 100000;
    c.adam.learning_rate = 5e-5;
    c.adam.decay_factor = 0.95;
    c.adam.decay_period = 1000;
    return c;
  }
  if (name == "ces") {
    c.batch = 100;
    c.contrasts = 1024;
    c.adam.learning_rate = 1e-4;
    // 1e-4 down to 1e-5 over 50K steps in 1K-step decrements.
    c.adam.decay_factor = std::pow(0.1, 1.0 / 50.0);
    c.adam.decay_period = 1000;
    return c;
  }
  c.batch = 256;
  c.contrasts = 63;
  c.steps = 500;
  c.adam.learning_rate = 1e-2;
  return c;
}

TrainConfig default_refine_config(const Model& model) {
  TrainConfig c = default_train_config(model);
  c.adam.decay_factor = 1.0;
  c.adam.decay_period = 0;
  const std::string name = model.name();
  if (name == "location-finding") {
    c.steps = 2500;
  } else if (name == "hyperbolic-discounting") {
    c.steps = 1000;
    c.adam.learning_rate = 5e-5;
  } else if (name == "ces") {
    c.steps = 10000;
    c.adam.learning_rate = 1e-5;
  } else {
    c.steps = 200;
  }
  return c;
}

TrainResult refine_policy(const Model& model, const PolicyParams& policy, const ThetaSource& source,
                          const History& prefix, std::size_t T, const TrainConfig& config,
                          const ProgressFn& progress) {
  config.validate();
  if (prefix.size() > T) throw DimensionError("refine_policy: prefix longer than T");
  if (source.kind() == ThetaSourceKind::kParticles && source.posterior()->tau != prefix.size()) {
    throw DimensionError("refine_policy: posterior was fitted on " + std::to_string(source.posterior()->tau) +
                         " steps but the prefix has " + std::to_string(prefix.size()));
  }
  const GradMode mode = config.grad_mode.value_or(default_grad_mode(model));
  TrainResult result;
  result.policy = policy;
  PolicyParams last_good = policy;
  AdamState adam(config.adam);
  const auto mask = policy.encoder_mask();
  int bad_run = 0;
  auto snapshot = [&](std::size_t done) {
    for (auto k : config.snapshot_steps) {
      if (k == done) result.snapshots.emplace_back(done, result.policy);
    }
  };
  snapshot(0);

  for (std::size_t step = 0; step < config.steps; ++step) {
    GradientOptions go{T, config.contrasts, config.batch, step_seed(config.seed, step), mode};
    PolicyGradient g = spce_gradient(model, result.policy, source, prefix, go);
    result.objective_trace.push_back(g.objective);
    auto grads = g.grads.tensors();
    for (std::size_t i = 0; i < grads.size(); ++i) {
      if (config.freeze_encoder && mask[i]) {
        grads[i]->fill(0.0);
      } else {
        *grads[i] *= -1.0;
      }
    }
    bool ok = std::isfinite(g.objective);
    if (ok) {
      const auto params = result.policy.tensors();
      const auto cgrads = std::as_const(g.grads).tensors();
      const AdamStepResult r = adam_step(adam, params, cgrads);
      ok = r.applied;
      if (!ok) result.diagnostic = r.diagnostic;
    } else {
      result.diagnostic = "non-finite objective at step " + std::to_string(step);
      log::warn("train: " + result.diagnostic);
    }
    if (ok) {
      bad_run = 0;
    } else {
      ++result.rejected_steps;
      if (++bad_run >= kDivergenceRun) {
        result.diverged = true;
        result.policy = last_good;
        result.diagnostic = "diverged: " + std::to_string(kDivergenceRun) + " consecutive bad steps ending at step " +
                            std::to_string(step) + " (" + result.diagnostic + ")";
        log::error("train: " + result.diagnostic);
        if (!config.checkpoint_dir.empty()) {
          save_policy(config.checkpoint_dir / "last-good.json", last_good,
                      {{"step", result.steps_done}, {"diverged", true}});
        }
        return result;
      }
    }
    ++result.steps_done;
    if (ok && bad_run == 0) last_good = result.policy;
    snapshot(step + 1);
    if (progress) progress(step + 1, config.steps, g.objective);
    if (config.checkpoint_every > 0 && !config.checkpoint_dir.empty() && (step + 1) % config.checkpoint_every == 0) {
      std::ostringstream name;
      name << "step-" << (step + 1) << ".json";
      save_policy(config.checkpoint_dir / name.str(), result.policy, {{"step", step + 1}, {"tau", prefix.size()}});
    }
  }
  return result;
}

TrainResult train_dad(const Model& model, PolicyParams init, std::size_t T, const TrainConfig& config,
                      const ProgressFn& progress) {
  return refine_policy(model, init, ThetaSource::prior(model), History{}, T, config, progress);
}

StaticResult optimize_static(const Model& model, Tensor init, const ThetaSource& source, const History& prefix,
                             std::size_t T, const TrainConfig& config) {
  config.validate();
  const GradMode mode = config.grad_mode.value_or(default_grad_mode(model));
  StaticResult r{std::move(init), {}, false};
  if (T == 0) return r;
  AdamState adam(config.adam);
  int bad_run = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    GradientOptions go{T, config.contrasts, config.batch, step_seed(config.seed, step), mode};
    DesignGradient g = pce_gradient(model, r.designs, source, prefix, go);
    r.objective_trace.push_back(g.objective);
    g.grads *= -1.0;
    Tensor* p[] = {&r.designs};
    const Tensor* q[] = {&g.grads};
    const bool ok = std::isfinite(g.objective) && adam_step(adam, p, q).applied;
    bad_run = ok ? 0 : bad_run + 1;
    if (bad_run >= kDivergenceRun) {
      r.diverged = true;
      break;
    }
  }
  return r;
}

StaticResult train_static(const Model& model, std::size_t T, const TrainConfig& config) {
  const std::size_t D = model.design_dim();
  Tensor init = Tensor::matrix(T, D);
  std::vector<double> mean(D), sd(D);
  model.random_design_distribution(mean, sd);
  Rng rng = Rng(config.seed).substream(0x57a7);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < D; ++i) init(t, i) = mean[i] + sd[i] * rng.normal();
  }
  return optimize_static(model, std::move(init), ThetaSource::prior(model), History{}, T, config);
}

StaticResult step_static(const Model& model, const Tensor& static_designs, const ThetaSource& posterior,
                         const History& prefix, std::size_t T, const TrainConfig& config) {
  return optimize_static(model, static_designs, posterior, prefix, T, config);
}

DesignPolicy random_policy(const Model& model, std::uint64_t seed) { return DesignPolicy::random_for(model, seed); }

void RefinementSchedule::validate() const {
  std::size_t prev = 0;
  for (std::size_t k = 0; k < taus.size(); ++k) {
    detail::require(taus[k] > prev, "schedule: refinement steps must be strictly increasing and > 0");
    detail::require(taus[k] < T, "schedule: refinement steps must be < T = " + std::to_string(T));
    prev = taus[k];
  }
  detail::require(budgets.size() == taus.size(), "schedule: need one training budget per refinement step");
}

nlohmann::json RefinementSchedule::to_json() const { return {{"taus", taus}, {"budgets", budgets}, {"T", T}}; }

RefinementSchedule RefinementSchedule::parse(const std::string& text, std::size_t T, std::size_t default_budget) {
  RefinementSchedule s;
  s.T = T;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    item = item.substr(b, e - b + 1);
    std::size_t v = 0;
    if (item == "T") {
      v = T;
    } else {
      try {
        std::size_t pos = 0;
        v = std::stoul(item, &pos);
        if (pos != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ConfigError("schedule: '" + item + "' is not a step index");
      }
    }
    if (v == 0 || v == T) continue;
    s.taus.push_back(v);
  }
  s.budgets.assign(s.taus.size(), default_budget);
  s.validate();
  return s;
}

SimulatedEnvironment::SimulatedEnvironment(const Model& model, std::uint64_t seed, const PriorPerturbation& prior)
    : model_(model), rng_(Rng(seed).substream(0xe4f)), theta_{std::vector<double>(model.theta_dim())} {
  model_.sample_prior(rng_, theta_.values, prior);
}

Outcome SimulatedEnvironment::observe(const RawDesign&, const Design& design, std::size_t) {
  const double innovation = model_.draw_innovation(rng_);
  return {model_.outcome_from_innovation(theta_.values, design.values, innovation, {}), model_.outcome_kind()};
}

Outcome CallbackEnvironment::observe(const RawDesign& raw, const Design& design, std::size_t t) {
  Outcome o = cb_(raw, design, t);
  if (o.kind != model_.outcome_kind()) throw SupportError("environment: outcome kind mismatch");
  model_.validate_outcome(o.value);
  return o;
}

RunResult run_stepdad(const Model& model, const PolicyParams& pi0, const StepDadConfig& config, Environment& env,
                      const ProgressFn& progress) {
  config.schedule.validate();
  const auto t_start = Clock::now();
  RunResult out;
  PolicyParams current = pi0;
  const std::size_t T = config.schedule.T;
  std::vector<std::size_t> ends = config.schedule.taus;
  ends.push_back(T);
  std::size_t start = 0;
  for (std::size_t k = 0; k < ends.size(); ++k) {
    StageTiming timing;
    timing.start = start;
    timing.end = ends[k];
    out.stage_policies.push_back(current);
    auto t0 = Clock::now();
    for (std::size_t t = start + 1; t <= ends[k]; ++t) {
      HistoryStep step;
      step.raw = next_design(current, out.history);
      step.design = constrain_design(model, step.raw);
      step.outcome = env.observe(step.raw, step.design, t);
      out.history.push_back(std::move(step));
    }
    timing.design_seconds = seconds_since(t0);
    start = ends[k];
    if (k + 1 < ends.size()) {
      const std::size_t budget = config.schedule.budgets[k];
      try {
        t0 = Clock::now();
        Rng prng = Rng(config.seed).substream(0x1f00 + k);
        auto posterior = std::make_shared<ParticlePosterior>(
            fit_posterior_is(model, out.history, config.posterior_samples, prng, config.inference_prior));
        timing.inference_seconds = seconds_since(t0);
        timing.ess = posterior->effective_sample_size;
        t0 = Clock::now();
        if (budget > 0) {
          TrainConfig rc = config.refine;
          rc.steps = budget;
          rc.seed = mix_seed(config.seed, 0x2f00 + k);
          TrainResult r = refine_policy(model, current, ThetaSource::particles(model, posterior), out.history, T,
                                        rc, progress);
          if (r.diverged) {
            timing.error = r.diagnostic;
            log::warn("run: refinement at tau = " + std::to_string(start) + " diverged; keeping previous policy");
          } else {
            current = std::move(r.policy);
          }
          timing.refine_steps = r.steps_done;
        }
        timing.refinement_seconds = seconds_since(t0);
      } catch (const std::exception& e) {
        timing.error = e.what();
        log::warn("run: refinement at tau = " + std::to_string(start) + " failed (" + e.what() +
                  "); keeping previous policy");
      }
    }
    out.timings.push_back(timing);
  }
  out.total_seconds = seconds_since(t_start);
  return out;
}

}  // namespace stepdad
