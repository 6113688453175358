#pragma once

#include <span>
#include <string>
#include <vector>

#include "stepdad/tensor.hpp"

namespace stepdad {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Step decay: the rate is multiplied by decay_factor every decay_period
  // steps. decay_period == 0 disables it.
  double decay_factor = 1.0;
  long decay_period = 0;

  void validate() const;
};

struct AdamStepResult {
  bool applied = true;
  std::string diagnostic;
};

/// Moment accumulators for one parameter set. Minimizes; callers that
/// maximize pass negated gradients.
class AdamState {
 public:
  explicit AdamState(AdamOptions options = {});

  const AdamOptions& options() const { return options_; }
  long step() const { return step_; }
  double effective_learning_rate() const;

  const std::vector<Tensor>& first_moment() const { return m_; }
  const std::vector<Tensor>& second_moment() const { return v_; }

  /// Clears moments and step count; keeps options.
  void reset();

 private:
  friend AdamStepResult adam_step(AdamState&, std::span<Tensor* const>, std::span<const Tensor* const>);
  AdamOptions options_;
  long step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

/// One bias-corrected adaptive-moment update. A step whose gradients contain
/// NaN or inf is rejected: nothing changes, the diagnostic says why.
AdamStepResult adam_step(AdamState& state, std::span<Tensor* const> params,
                         std::span<const Tensor* const> grads);

}  // namespace stepdad
