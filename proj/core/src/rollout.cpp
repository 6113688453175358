#include "stepdad/rollout.hpp"

#include "stepdad/errors.hpp"

namespace stepdad {

DesignPolicy DesignPolicy::network(const PolicyParams& params) {
  DesignPolicy d;
  d.kind_ = DesignPolicyKind::kNetwork;
  d.params_ = &params;
  return d;
}

DesignPolicy DesignPolicy::fixed(Tensor raw_designs) {
  if (raw_designs.rank() != 2 && !raw_designs.empty()) throw DimensionError("static designs must be T x design_dim");
  DesignPolicy d;
  d.kind_ = DesignPolicyKind::kStatic;
  d.static_ = std::move(raw_designs);
  return d;
}

DesignPolicy DesignPolicy::random(std::vector<double> mean, std::vector<double> sd, std::uint64_t seed) {
  if (mean.size() != sd.size() || mean.empty()) throw DimensionError("random designs: mean/sd width mismatch");
  DesignPolicy d;
  d.kind_ = DesignPolicyKind::kRandom;
  d.mean_ = std::move(mean);
  d.sd_ = std::move(sd);
  d.seed_ = seed;
  return d;
}

DesignPolicy DesignPolicy::random_for(const Model& model, std::uint64_t seed) {
  std::vector<double> mean(model.design_dim()), sd(model.design_dim());
  model.random_design_distribution(mean, sd);
  return random(std::move(mean), std::move(sd), seed);
}

std::size_t DesignPolicy::design_dim() const {
  switch (kind_) {
    case DesignPolicyKind::kNetwork: return params_->design_dim;
    case DesignPolicyKind::kStatic: return static_.cols();
    case DesignPolicyKind::kRandom: return mean_.size();
  }
  return 0;
}

void DesignPolicy::random_design(std::uint64_t stream, std::size_t t, std::span<double> out) const {
  Rng r(mix_seed(mix_seed(seed_, stream), t));
  for (std::size_t i = 0; i < mean_.size(); ++i) out[i] = mean_[i] + sd_[i] * r.normal();
}

RawDesign DesignPolicy::design(const History& history, std::uint64_t stream) const {
  const std::size_t t = history.size() + 1;
  switch (kind_) {
    case DesignPolicyKind::kNetwork: return next_design(*params_, history);
    case DesignPolicyKind::kStatic: {
      if (t > static_.rows()) {
        throw DimensionError("static designs cover " + std::to_string(static_.rows()) + " steps, step " +
                             std::to_string(t) + " requested");
      }
      auto row = static_.row(t - 1);
      return RawDesign{{row.begin(), row.end()}};
    }
    case DesignPolicyKind::kRandom: {
      RawDesign r{std::vector<double>(mean_.size())};
      random_design(stream, t, r.values);
      return r;
    }
  }
  return {};
}

History RolloutBatch::history(std::size_t b, const History& prefix, OutcomeKind kind) const {
  History h = prefix;
  for (std::size_t k = 0; k < steps; ++k) {
    auto r = raw[k].row(b);
    auto d = design[k].row(b);
    h.push_back({RawDesign{{r.begin(), r.end()}}, Design{{d.begin(), d.end()}}, Outcome{y[k][b], kind}});
  }
  return h;
}

RolloutBatch simulate_rollouts(const Model& model, const DesignPolicy& policy, const ThetaSource& source,
                               const History& prefix, const RolloutRequest& req) {
  const std::size_t tau = prefix.size();
  if (req.T < tau) {
    throw DimensionError("rollout: horizon T = " + std::to_string(req.T) + " is shorter than the prefix (" +
                         std::to_string(tau) + ")");
  }
  const std::size_t B = req.count, D = model.design_dim(), P = model.theta_dim();
  if (policy.design_dim() != D) throw DimensionError("rollout: policy design width does not match the model");
  if (req.outcome_design_grad && !model.reparameterizable()) {
    throw ConfigError("rollout: pathwise outcome derivatives need a reparameterizable model (" + model.name() + ")");
  }
  RolloutBatch rb;
  rb.first = req.first;
  rb.count = B;
  rb.tau = tau;
  rb.steps = req.T - tau;
  rb.theta0 = Tensor::matrix(B, P);
  rb.recorded = req.record && policy.kind() == DesignPolicyKind::kNetwork;

  const Rng base(req.seed);
  rb.streams.reserve(B);
  for (std::size_t b = 0; b < B; ++b) {
    rb.streams.push_back(base.substream(req.first + b));
    source.draw(rb.streams.back(), rb.theta0.row(b));
  }

  const bool network = policy.kind() == DesignPolicyKind::kNetwork;
  Tensor running;
  if (network) {
    const PolicyParams& p = policy.params();
    Tensor prefix_pool = Tensor::matrix(1, p.representation_dim());
    if (tau > 0) {
      Tensor raw = Tensor::matrix(tau, D);
      std::vector<double> ys(tau);
      for (std::size_t t = 0; t < tau; ++t) {
        for (std::size_t i = 0; i < D; ++i) raw(t, i) = prefix[t].raw.values[i];
        ys[t] = prefix[t].outcome.value;
      }
      PairTrace tr = encode_pairs(p, raw, ys);
      for (std::size_t t = 0; t < tau; ++t) {
        for (std::size_t o = 0; o < p.representation_dim(); ++o) prefix_pool[o] += tr.output(t, o);
      }
      if (rb.recorded) rb.prefix_trace = std::move(tr);
    }
    running = Tensor::matrix(B, p.representation_dim());
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t o = 0; o < p.representation_dim(); ++o) running(b, o) = prefix_pool[o];
    }
  }

  for (std::size_t k = 0; k < rb.steps; ++k) {
    const std::size_t t = tau + k + 1;
    Tensor raw = Tensor::matrix(B, D);
    if (network) {
      MlpTrace dec = decode(policy.params(), running);
      raw = dec.output();
      if (rb.recorded) rb.decoder.push_back(std::move(dec));
    } else if (policy.kind() == DesignPolicyKind::kStatic) {
      if (t > policy.static_designs().rows()) {
        throw DimensionError("static designs cover " + std::to_string(policy.static_designs().rows()) +
                             " steps, horizon is " + std::to_string(req.T));
      }
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < D; ++i) raw(b, i) = policy.static_designs()(t - 1, i);
      }
    } else {
      for (std::size_t b = 0; b < B; ++b) policy.random_design(req.first + b, t, raw.row(b));
    }

    Tensor design = Tensor::matrix(B, D), dcon = Tensor::matrix(B, D);
    Tensor dy = req.outcome_design_grad ? Tensor::matrix(B, D) : Tensor();
    std::vector<double> ys(B);
    for (std::size_t b = 0; b < B; ++b) {
      model.constrain(raw.row(b), design.row(b), dcon.row(b));
      const double innovation = model.draw_innovation(rb.streams[b]);
      ys[b] = model.outcome_from_innovation(rb.theta0.row(b), design.row(b), innovation,
                                            req.outcome_design_grad ? dy.row(b) : std::span<double>());
    }

    if (network && k + 1 < rb.steps) {
      PairTrace enc = encode_pairs(policy.params(), raw, ys);
      running += enc.output;
      if (rb.recorded) rb.encoder.push_back(std::move(enc));
    }
    rb.raw.push_back(std::move(raw));
    rb.design.push_back(std::move(design));
    rb.dconstrain.push_back(std::move(dcon));
    rb.dy_ddesign.push_back(std::move(dy));
    rb.y.push_back(std::move(ys));
  }
  return rb;
}

History rollout_history(const Model& model, const DesignPolicy& policy, std::span<const double> theta,
                        const History& prefix, std::size_t T, Rng& rng, std::uint64_t design_stream) {
  History h = prefix;
  while (h.size() < T) {
    HistoryStep step;
    step.raw = policy.design(h, design_stream);
    step.design = constrain_design(model, step.raw);
    const double innovation = model.draw_innovation(rng);
    step.outcome = {model.outcome_from_innovation(theta, step.design.values, innovation, {}), model.outcome_kind()};
    h.push_back(std::move(step));
  }
  return h;
}

}  // namespace stepdad
