#pragma once

#include <cstdint>
#include <vector>

#include "stepdad/history.hpp"
#include "stepdad/model.hpp"
#include "stepdad/policy.hpp"
#include "stepdad/theta_source.hpp"

namespace stepdad {

enum class DesignPolicyKind { kNetwork, kStatic, kRandom };

/// Whatever supplies xi_t during a rollout: a policy network (adaptive),
/// a fixed design list (static / PCE variant), or i.i.d. random designs.
///
/// Network policies are held by pointer; the PolicyParams must outlive the
/// DesignPolicy.
class DesignPolicy {
 public:
  static DesignPolicy network(const PolicyParams& params);
  /// Rows are raw designs for steps 1..T (row t-1 is used at step t).
  static DesignPolicy fixed(Tensor raw_designs);
  static DesignPolicy random(std::vector<double> mean, std::vector<double> sd, std::uint64_t seed);
  /// Random designs from the model's declared raw-design distribution.
  static DesignPolicy random_for(const Model& model, std::uint64_t seed);

  DesignPolicyKind kind() const { return kind_; }
  std::size_t design_dim() const;
  const PolicyParams& params() const { return *params_; }
  const Tensor& static_designs() const { return static_; }
  std::uint64_t seed() const { return seed_; }

  /// Raw design for step history.size() + 1. `stream` selects the random
  /// design stream (ignored by the other kinds).
  RawDesign design(const History& history, std::uint64_t stream = 0) const;
  /// Random kind only: the design at step t (1-based) of stream `stream`.
  void random_design(std::uint64_t stream, std::size_t t, std::span<double> out) const;

 private:
  DesignPolicyKind kind_ = DesignPolicyKind::kRandom;
  const PolicyParams* params_ = nullptr;
  Tensor static_;
  std::vector<double> mean_, sd_;
  std::uint64_t seed_ = 0;
};

/// B simulated suffixes h_{tau+1:T} sharing a prefix h_tau.
///
/// Rollout with global index i draws from Rng(seed).substream(i): theta_0
/// first, then one innovation per step; contrasts for the bounds continue
/// on the same stream afterwards (`streams`).
struct RolloutBatch {
  std::size_t first = 0;
  std::size_t count = 0;
  std::size_t tau = 0;
  std::size_t steps = 0;  // T - tau
  Tensor theta0;          // count x theta_dim
  std::vector<Tensor> raw;         // per suffix step: count x design_dim
  std::vector<Tensor> design;      // constrained
  std::vector<Tensor> dconstrain;  // d design / d raw
  std::vector<Tensor> dy_ddesign;  // pathwise only
  std::vector<std::vector<double>> y;
  std::vector<Rng> streams;

  // Network traces, recorded on request.
  bool recorded = false;
  PairTrace prefix_trace;
  std::vector<MlpTrace> decoder;   // per suffix step
  std::vector<PairTrace> encoder;  // per suffix step except the last

  /// Prefix followed by the suffix of rollout b (0-based within the batch).
  History history(std::size_t b, const History& prefix, OutcomeKind kind) const;
};

struct RolloutRequest {
  std::size_t T = 0;
  std::uint64_t seed = 0;
  std::size_t first = 0;
  std::size_t count = 0;
  bool record = false;          // keep network traces for backprop
  bool outcome_design_grad = false;  // d y / d design for pathwise gradients
};

RolloutBatch simulate_rollouts(const Model& model, const DesignPolicy& policy, const ThetaSource& source,
                               const History& prefix, const RolloutRequest& request);

/// Single rollout of the suffix under a fixed theta (e.g. a simulated
/// environment's hidden parameter); used by run and evaluation helpers.
History rollout_history(const Model& model, const DesignPolicy& policy, std::span<const double> theta,
                        const History& prefix, std::size_t T, Rng& rng, std::uint64_t design_stream = 0);

}  // namespace stepdad
