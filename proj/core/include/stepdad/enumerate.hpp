#pragma once

#include <functional>
#include <vector>

#include "stepdad/history.hpp"
#include "stepdad/model.hpp"
#include "stepdad/rollout.hpp"

namespace stepdad {

/// Maps the history so far to the next raw design.
using Designer = std::function<RawDesign(const History&)>;

/// Copies `policy`; a network policy's parameters must outlive the designer.
Designer designer_for(const DesignPolicy& policy, std::uint64_t stream = 0);

/// Exact joint p(theta, h_{tau+1:T} | h_tau) over a finite theta support
/// and a finite outcome set. Histories include the prefix.
struct JointTable {
  std::vector<ThetaAtom> atoms;
  std::vector<History> histories;
  std::vector<std::vector<double>> joint;  // [history][atom]

  double total() const;
  std::vector<double> history_marginals() const;
  std::vector<double> theta_marginals() const;
};

/// Enumerates every outcome sequence from `prefix` up to step T with theta
/// distributed as `atoms`. Throws ConfigError when |Y|^(T - tau) * |atoms|
/// exceeds 1e6 or the model is not discrete.
JointTable toy_enumerate(const Model& model, const Designer& designer, std::size_t T,
                         const std::vector<ThetaAtom>& atoms, const History& prefix = {});
/// Prior atoms, empty prefix.
JointTable toy_enumerate(const Model& model, const Designer& designer, std::size_t T);

/// Mutual information between theta and the enumerated suffix.
double exact_eig(const JointTable& table);

/// Posterior atoms p(theta | h) by Bayes' rule on finite support.
std::vector<ThetaAtom> exact_posterior(const Model& model, const std::vector<ThetaAtom>& atoms, const History& h);

}  // namespace stepdad
