#include "stepdad/eval.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "stepdad/errors.hpp"
#include "stepdad/log.hpp"

namespace stepdad {

PairedBounds estimate_total_eig(const Model& model, const DesignPolicy& policy, const ThetaSource& source,
                                const BoundOptions& options) {
  return estimate_bounds(model, policy, source, History{}, options);
}

namespace {

std::shared_ptr<ParticlePosterior> posterior_from_atoms(const std::vector<ThetaAtom>& atoms, std::size_t tau) {
  std::vector<Theta> thetas;
  std::vector<double> logw;
  for (const auto& a : atoms) {
    thetas.push_back(a.theta);
    logw.push_back(std::log(a.mass));
  }
  return std::make_shared<ParticlePosterior>(ParticlePosterior::from_log_weights(thetas, logw, tau));
}

DeltaRow delta_for_prefix(const Model& model, const PolicyParams& pi0, const DeltaConfig& c, const History& prefix,
                          std::shared_ptr<ParticlePosterior> posterior, std::size_t index, const ProgressFn& progress) {
  DeltaRow row;
  row.history = index;
  row.ess = posterior->effective_sample_size;
  const ThetaSource source = ThetaSource::particles(model, posterior);
  TrainConfig rc = c.refine;
  rc.seed = mix_seed(c.seed, 0xdd00 + index);
  PolicyParams refined = pi0;
  try {
    TrainResult r = refine_policy(model, pi0, source, prefix, c.T, rc, progress);
    row.refine_steps = r.steps_done;
    if (r.diverged) {
      row.error = r.diagnostic;
    } else {
      refined = std::move(r.policy);
    }
  } catch (const std::exception& e) {
    row.error = e.what();
    log::warn("delta: refinement failed for history " + std::to_string(index) + ": " + e.what());
  }
  BoundOptions b = c.bounds;
  b.T = c.T;
  b.seed = mix_seed(c.bounds.seed, 0xb0 + index);
  const PairedBounds refined_b = estimate_bounds(model, DesignPolicy::network(refined), source, prefix, b);
  row.refined_lower = refined_b.lower.value;
  if (c.direct) {
    row.delta = row.refined_lower;
  } else {
    const PairedBounds base_b = estimate_bounds(model, DesignPolicy::network(pi0), source, prefix, b);
    row.base_upper = base_b.upper.value;
    row.delta = row.refined_lower - row.base_upper;
  }
  return row;
}

}  // namespace

DeltaEstimate estimate_delta_eig(const Model& model, const PolicyParams& pi0, const DeltaConfig& c,
                                 const ProgressFn& progress) {
  if (c.tau > c.T) throw ConfigError("delta: tau must be <= T");
  DeltaEstimate est;
  est.tau = c.tau;
  const auto prior_atoms = model.prior_atoms(c.prior);
  const DesignPolicy base = DesignPolicy::network(pi0);

  if (c.bounds.exact && !prior_atoms.empty()) {
    const JointTable prefixes = toy_enumerate(model, designer_for(base), c.tau, prior_atoms);
    const auto marginals = prefixes.history_marginals();
    for (std::size_t i = 0; i < prefixes.histories.size(); ++i) {
      if (marginals[i] <= 0.0) continue;
      const History& h = prefixes.histories[i];
      auto posterior = posterior_from_atoms(exact_posterior(model, prior_atoms, h), h.size());
      DeltaRow row = delta_for_prefix(model, pi0, c, h, posterior, i, progress);
      row.weight = marginals[i];
      est.rows.push_back(std::move(row));
    }
  } else {
    if (c.histories == 0) throw ConfigError("delta: histories must be >= 1");
    for (std::size_t i = 0; i < c.histories; ++i) {
      SimulatedEnvironment env(model, mix_seed(c.seed, i), c.prior);
      Rng outcome_rng = Rng(mix_seed(c.seed, i)).substream(0x0b5);
      const History h = rollout_history(model, base, env.theta().values, History{}, c.tau, outcome_rng);
      Rng prng = Rng(mix_seed(c.seed, i)).substream(0x1f);
      auto posterior =
          std::make_shared<ParticlePosterior>(fit_posterior_is(model, h, c.posterior_samples, prng, c.prior));
      DeltaRow row = delta_for_prefix(model, pi0, c, h, posterior, i, progress);
      row.weight = 1.0 / static_cast<double>(c.histories);
      est.rows.push_back(std::move(row));
    }
  }
  for (const auto& r : est.rows) est.mean += r.weight * r.delta;
  if (!c.bounds.exact && est.rows.size() > 1) {
    double ss = 0.0;
    for (const auto& r : est.rows) ss += (r.delta - est.mean) * (r.delta - est.mean);
    const double n = static_cast<double>(est.rows.size());
    est.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return est;
}

EvalRow make_eval_row(const std::string& method, const PairedBounds& b) {
  return {method, b.lower.value, b.lower.se, b.upper.value, b.upper.se, b.lower.n, b.lower.l, b.lower.seed,
          b.lower.source};
}

EvalRow stepdad_total_row(const PairedBounds& base_total, const DeltaEstimate& delta, const std::string& source) {
  EvalRow r = make_eval_row("step-dad(tau=" + std::to_string(delta.tau) + ")", base_total);
  r.lower += delta.mean;
  r.upper += delta.mean;
  r.lower_se = std::hypot(r.lower_se, delta.se);
  r.upper_se = std::hypot(r.upper_se, delta.se);
  r.source = source;
  return r;
}

void EvalReport::write_csv(std::ostream& out) const {
  out << std::setprecision(17);
  out << "section,method,tau,shift,source,lower,lower_se,upper,upper_se,N,L,seed\n";
  for (const auto& m : methods) {
    out << "total," << m.method << ",,,\"" << m.source << "\"," << m.lower << ',' << m.lower_se << ',' << m.upper
        << ',' << m.upper_se << ',' << m.n << ',' << m.l << ',' << m.seed << '\n';
  }
  for (const auto& d : deltas) {
    out << "delta,step-dad," << d.tau << ",,," << d.delta << ',' << d.se << ",,," << d.histories << ",,\n";
  }
  for (const auto& r : robustness) {
    out << "robustness," << r.method << ",," << r.shift << ",\"" << r.source << "\"," << r.lower << ',' << r.lower_se
        << ',' << r.upper << ',' << r.upper_se << ",,,\n";
  }
}

void EvalReport::write_table(std::ostream& out) const {
  auto cell = [](double v, double se) {
    // Values that round to zero print as 0.000 rather than -0.000.
    if (std::abs(v) < 5e-4) v = 0.0;
    std::ostringstream o;
    o << std::fixed << std::setprecision(3) << v << " (+- " << se << ")";
    return o.str();
  };
  if (!methods.empty()) {
    out << std::left << std::setw(24) << "Method" << std::setw(24) << "Lower bound" << "Upper bound\n";
    for (const auto& m : methods) {
      out << std::left << std::setw(24) << m.method << std::setw(24) << cell(m.lower, m.lower_se)
          << cell(m.upper, m.upper_se) << '\n';
    }
  }
  for (const auto& d : deltas) {
    out << "Delta EIG at tau = " << d.tau << ": " << cell(d.delta, d.se) << " over " << d.histories
        << " histories\n";
  }
  if (!robustness.empty()) {
    out << std::left << std::setw(10) << "Shift" << std::setw(24) << "Method" << std::setw(24) << "Lower bound"
        << "Upper bound\n";
    for (const auto& r : robustness) {
      out << std::left << std::setw(10) << r.shift << std::setw(24) << r.method << std::setw(24)
          << cell(r.lower, r.lower_se) << cell(r.upper, r.upper_se) << '\n';
    }
  }
}

std::vector<RobustnessRow> robustness_sweep(const Model& model,
                                            const std::vector<std::pair<std::string, DesignPolicy>>& policies,
                                            const RobustnessConfig& config, const PolicyParams* stepdad_base,
                                            const ProgressFn& progress) {
  std::vector<RobustnessRow> rows;
  for (const auto& prior : config.priors) {
    const ThetaSource source = ThetaSource::perturbed(model, prior);
    for (const auto& [name, policy] : policies) {
      const PairedBounds b = estimate_total_eig(model, policy, source, config.bounds);
      rows.push_back({prior.shift, source.tag(), name, b.lower.value, b.lower.se, b.upper.value, b.upper.se});
    }
    if (config.include_stepdad && stepdad_base != nullptr) {
      const PairedBounds base = estimate_total_eig(model, DesignPolicy::network(*stepdad_base), source, config.bounds);
      DeltaConfig dc = config.delta;
      dc.prior = prior;
      const DeltaEstimate delta = estimate_delta_eig(model, *stepdad_base, dc, progress);
      const EvalRow total = stepdad_total_row(base, delta, source.tag());
      rows.push_back({prior.shift, source.tag(), total.method, total.lower, total.lower_se, total.upper,
                      total.upper_se});
    }
  }
  return rows;
}

DecompositionResult decomposition_check(const Model& model, const Designer& designer, std::size_t T,
                                        std::size_t tau) {
  if (tau > T) throw ConfigError("decomposition_check: tau must be <= T");
  const auto atoms = model.prior_atoms();
  DecompositionResult r;
  r.total = exact_eig(toy_enumerate(model, designer, T, atoms));
  r.prefix = tau == 0 ? 0.0 : exact_eig(toy_enumerate(model, designer, tau, atoms));
  if (tau < T) {
    const JointTable prefixes = toy_enumerate(model, designer, tau, atoms);
    const auto marginals = prefixes.history_marginals();
    for (std::size_t i = 0; i < prefixes.histories.size(); ++i) {
      if (marginals[i] <= 0.0) continue;
      const History& h = prefixes.histories[i];
      const auto post = exact_posterior(model, atoms, h);
      r.expected_remaining += marginals[i] * exact_eig(toy_enumerate(model, designer, T, post, h));
    }
  }
  r.residual = std::abs(r.total - (r.prefix + r.expected_remaining));
  return r;
}

}  // namespace stepdad
