#include "stepdad/enumerate.hpp"

#include <cmath>

#include "stepdad/errors.hpp"

namespace stepdad {

Designer designer_for(const DesignPolicy& policy, std::uint64_t stream) {
  return [policy, stream](const History& h) { return policy.design(h, stream); };
}

double JointTable::total() const {
  double s = 0.0;
  for (const auto& row : joint) {
    for (double p : row) s += p;
  }
  return s;
}

std::vector<double> JointTable::history_marginals() const {
  std::vector<double> out;
  for (const auto& row : joint) {
    double s = 0.0;
    for (double p : row) s += p;
    out.push_back(s);
  }
  return out;
}

std::vector<double> JointTable::theta_marginals() const {
  std::vector<double> out(atoms.size(), 0.0);
  for (const auto& row : joint) {
    for (std::size_t a = 0; a < row.size(); ++a) out[a] += row[a];
  }
  return out;
}

namespace {

void extend(const Model& model, const Designer& designer, std::size_t T, const std::vector<double>& outcomes,
            const std::vector<ThetaAtom>& atoms, History& h, std::vector<double>& probs, JointTable& table) {
  if (h.size() == T) {
    table.histories.push_back(h);
    table.joint.push_back(probs);
    return;
  }
  HistoryStep step;
  step.raw = designer(h);
  step.design = constrain_design(model, step.raw);
  const std::vector<double> saved = probs;
  for (double y : outcomes) {
    for (std::size_t a = 0; a < atoms.size(); ++a) {
      probs[a] = saved[a] * std::exp(model.log_likelihood(atoms[a].theta.values, step.design.values, y, {}, nullptr));
    }
    step.outcome = {y, model.outcome_kind()};
    h.push_back(step);
    extend(model, designer, T, outcomes, atoms, h, probs, table);
    h.steps.pop_back();
  }
  probs = saved;
}

}  // namespace

JointTable toy_enumerate(const Model& model, const Designer& designer, std::size_t T,
                         const std::vector<ThetaAtom>& atoms, const History& prefix) {
  const auto outcomes = model.discrete_outcomes();
  if (outcomes.empty() || atoms.empty()) {
    throw ConfigError("toy_enumerate: " + model.name() + " has no finite outcome set or theta support");
  }
  if (T < prefix.size()) throw DimensionError("toy_enumerate: T shorter than the prefix");
  const double cells =
      std::pow(static_cast<double>(outcomes.size()), static_cast<double>(T - prefix.size())) * atoms.size();
  if (cells > 1e6) {
    throw ConfigError("toy_enumerate: table of " + std::to_string(cells) + " cells exceeds the 1e6 limit");
  }
  JointTable table;
  table.atoms = atoms;
  std::vector<double> probs;
  for (const auto& a : atoms) probs.push_back(a.mass);
  History h = prefix;
  extend(model, designer, T, outcomes, atoms, h, probs, table);
  return table;
}

JointTable toy_enumerate(const Model& model, const Designer& designer, std::size_t T) {
  return toy_enumerate(model, designer, T, model.prior_atoms());
}

double exact_eig(const JointTable& table) {
  double eig = 0.0;
  for (const auto& row : table.joint) {
    double marginal = 0.0;
    for (double p : row) marginal += p;
    for (std::size_t a = 0; a < row.size(); ++a) {
      if (row[a] <= 0.0) continue;
      // p(h | theta) / p(h) = joint / (mass * marginal)
      eig += row[a] * std::log(row[a] / (table.atoms[a].mass * marginal));
    }
  }
  return eig;
}

std::vector<ThetaAtom> exact_posterior(const Model& model, const std::vector<ThetaAtom>& atoms, const History& h) {
  std::vector<ThetaAtom> out = atoms;
  double total = 0.0;
  for (auto& a : out) {
    double lik = 1.0;
    for (const auto& s : h.steps) {
      lik *= std::exp(model.log_likelihood(a.theta.values, s.design.values, s.outcome.value, {}, nullptr));
    }
    a.mass *= lik;
    total += a.mass;
  }
  if (!(total > 0.0)) throw NumericError("exact_posterior: history has zero probability");
  for (auto& a : out) a.mass /= total;
  return out;
}

}  // namespace stepdad
