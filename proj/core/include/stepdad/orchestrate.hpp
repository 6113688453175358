#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stepdad/adam.hpp"
#include "stepdad/bounds.hpp"
#include "stepdad/inference.hpp"
#include "stepdad/policy.hpp"

namespace stepdad {

struct TrainConfig {
  std::size_t batch = 1024;
  std::size_t contrasts = 1023;
  std::size_t steps = 50000;
  AdamOptions adam{1e-4};
  std::optional<GradMode> grad_mode;  // default: by outcome kind
  std::uint64_t seed = 0;
  bool freeze_encoder = false;
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
  /// Step counts at which a copy of the policy is kept in
  /// TrainResult::snapshots (0 = the initial policy).
  std::vector<std::size_t> snapshot_steps;

  void validate() const;
};

/// Per-model defaults from the training tables.
TrainConfig default_train_config(const Model& model);
/// Fine-tuning defaults: training batch and contrasts, the per-model
/// fine-tuning rate, no decay, and the per-stage step budget.
TrainConfig default_refine_config(const Model& model);

using ProgressFn = std::function<void(std::size_t step, std::size_t total, double objective)>;

struct TrainResult {
  PolicyParams policy;
  std::vector<double> objective_trace;  // mean sPCE integrand per step
  std::size_t steps_done = 0;
  std::size_t rejected_steps = 0;
  bool diverged = false;
  std::string diagnostic;
  std::vector<std::pair<std::size_t, PolicyParams>> snapshots;
};

/// Offline stage: maximize the unconditional sPCE objective.
TrainResult train_dad(const Model& model, PolicyParams init, std::size_t T, const TrainConfig& config,
                      const ProgressFn& progress = {});

/// Fine-tune a policy on the conditional sPCE objective with contrasts and
/// theta_0 drawn from `source` (normally posterior particles). Warm starts
/// from `policy`; the optimizer state starts fresh.
TrainResult refine_policy(const Model& model, const PolicyParams& policy, const ThetaSource& source,
                          const History& prefix, std::size_t T, const TrainConfig& config,
                          const ProgressFn& progress = {});

/// Direct optimization of a design list on the PCE objective. Rows before
/// prefix.size() get zero gradient and stay fixed.
struct StaticResult {
  Tensor designs;
  std::vector<double> objective_trace;
  bool diverged = false;
};
StaticResult optimize_static(const Model& model, Tensor init, const ThetaSource& source, const History& prefix,
                             std::size_t T, const TrainConfig& config);
/// Static baseline from random initial designs.
StaticResult train_static(const Model& model, std::size_t T, const TrainConfig& config);
/// Step-static: re-optimize the suffix designs under the tau-posterior.
StaticResult step_static(const Model& model, const Tensor& static_designs, const ThetaSource& posterior,
                         const History& prefix, std::size_t T, const TrainConfig& config);

DesignPolicy random_policy(const Model& model, std::uint64_t seed);

/// tau_1 < ... < tau_K, all in (0, T), with one training budget per stage.
struct RefinementSchedule {
  std::vector<std::size_t> taus;
  std::vector<std::size_t> budgets;
  std::size_t T = 0;

  void validate() const;
  nlohmann::json to_json() const;
  /// Parses "0,3,6" style lists (leading 0 and trailing T optional).
  static RefinementSchedule parse(const std::string& text, std::size_t T, std::size_t default_budget);
};

/// Source of outcomes during deployment.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual Outcome observe(const RawDesign& raw, const Design& design, std::size_t t) = 0;
};

/// Hidden theta* drawn once from the prior (or a perturbed prior).
class SimulatedEnvironment final : public Environment {
 public:
  SimulatedEnvironment(const Model& model, std::uint64_t seed, const PriorPerturbation& prior = {});
  Outcome observe(const RawDesign& raw, const Design& design, std::size_t t) override;
  const Theta& theta() const { return theta_; }

 private:
  const Model& model_;
  Rng rng_;
  Theta theta_;
};

/// Outcomes supplied by a callback (terminal prompt, HTTP session).
class CallbackEnvironment final : public Environment {
 public:
  using Callback = std::function<Outcome(const RawDesign&, const Design&, std::size_t)>;
  CallbackEnvironment(const Model& model, Callback cb) : model_(model), cb_(std::move(cb)) {}
  Outcome observe(const RawDesign& raw, const Design& design, std::size_t t) override;

 private:
  const Model& model_;
  Callback cb_;
};

struct StepDadConfig {
  RefinementSchedule schedule;
  TrainConfig refine;
  std::size_t posterior_samples = 20000;
  PriorPerturbation inference_prior;  // prior used as the IS proposal
  std::uint64_t seed = 0;
};

struct StageTiming {
  std::size_t start = 0;  // steps start+1 .. end designed by this stage's policy
  std::size_t end = 0;
  double design_seconds = 0.0;
  double inference_seconds = 0.0;
  double refinement_seconds = 0.0;
  double ess = 0.0;
  std::size_t refine_steps = 0;
  std::string error;
};

struct RunResult {
  History history;
  std::vector<PolicyParams> stage_policies;  // policy used in each stage
  std::vector<StageTiming> timings;
  double total_seconds = 0.0;
};

/// Online stage: design with the current policy, infer at each tau_k, refine,
/// continue. A failed refinement keeps the previous stage's policy.
RunResult run_stepdad(const Model& model, const PolicyParams& pi0, const StepDadConfig& config, Environment& env,
                      const ProgressFn& progress = {});

}  // namespace stepdad
