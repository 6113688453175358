#include "stepdad/adam.hpp"

#include <cmath>

#include "stepdad/errors.hpp"
#include "stepdad/log.hpp"

namespace stepdad {

void AdamOptions::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("adam: learning rate must be > 0");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) {
    throw ConfigError("adam: betas must lie in (0, 1)");
  }
  if (!(epsilon > 0)) throw ConfigError("adam: epsilon must be > 0");
  if (decay_period < 0 || !(decay_factor > 0)) throw ConfigError("adam: invalid decay schedule");
}

AdamState::AdamState(AdamOptions options) : options_(options) { options_.validate(); }

double AdamState::effective_learning_rate() const {
  if (options_.decay_period <= 0) return options_.learning_rate;
  return options_.learning_rate * std::pow(options_.decay_factor, static_cast<double>(step_ / options_.decay_period));
}

void AdamState::reset() {
  step_ = 0;
  m_.clear();
  v_.clear();
}

AdamStepResult adam_step(AdamState& state, std::span<Tensor* const> params,
                         std::span<const Tensor* const> grads) {
  if (params.size() != grads.size()) throw DimensionError("adam_step: parameter/gradient count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(*grads[k])) {
      throw DimensionError("adam_step: gradient " + std::to_string(k) + " has shape " +
                           shape_string(grads[k]->shape()) + ", parameter has " +
                           shape_string(params[k]->shape()));
    }
    if (!grads[k]->all_finite()) {
      AdamStepResult r{false, "non-finite gradient in tensor " + std::to_string(k) + "; step skipped"};
      log::warn(r.diagnostic);
      return r;
    }
  }
  if (state.m_.empty()) {
    for (const Tensor* p : params) {
      state.m_.emplace_back(p->shape());
      state.v_.emplace_back(p->shape());
    }
  } else if (state.m_.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state built for a different parameter set");
  }

  const AdamOptions& o = state.options_;
  const double lr = state.effective_learning_rate();
  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    double* p = params[k]->data();
    const double* g = grads[k]->data();
    double* m = state.m_[k].data();
    double* v = state.v_[k].data();
    for (std::size_t i = 0, n = params[k]->size(); i < n; ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + o.epsilon);
    }
  }
  return {};
}

}  // namespace stepdad
