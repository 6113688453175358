#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "stepdad/history.hpp"
#include "stepdad/model.hpp"

namespace stepdad {

/// Weighted particle approximation of p(theta | h_tau).
struct ParticlePosterior {
  std::vector<Theta> thetas;
  std::vector<double> log_weights;  // normalized: logsumexp == 0
  std::vector<double> weights;
  std::vector<double> cumulative;   // running sum of weights, last == 1
  std::size_t tau = 0;
  double effective_sample_size = 0.0;

  std::size_t size() const { return thetas.size(); }
  bool empty() const { return thetas.empty(); }

  /// Normalizes arbitrary log-weights. Throws NumericError if every weight
  /// is -inf or any is NaN.
  static ParticlePosterior from_log_weights(std::vector<Theta> thetas, std::vector<double> log_weights,
                                            std::size_t tau);
  /// Index drawn by inverse-CDF lookup on the cumulative weights.
  std::size_t draw_index(double u) const;
};

/// Self-normalized importance sampling with the prior (optionally
/// perturbed) as proposal. Logs a warning when ESS < 5% of n.
ParticlePosterior fit_posterior_is(const Model& model, const History& history, std::size_t n_samples, Rng& rng,
                                   const PriorPerturbation& prior = {});

/// Multinomial resampling with replacement.
std::vector<Theta> resample(const ParticlePosterior& posterior, std::size_t n, Rng& rng);

/// 1 / sum w_i^2.
double ess(const ParticlePosterior& posterior);

struct PosteriorSummary {
  std::vector<std::string> names;
  std::vector<double> mean;
  std::vector<double> q05;
  std::vector<double> q50;
  std::vector<double> q95;
  double ess = 0.0;
  std::size_t particles = 0;
  std::size_t tau = 0;

  nlohmann::json to_json() const;
};

PosteriorSummary summarize(const Model& model, const ParticlePosterior& posterior);

/// One row per particle: theta components then weight.
void write_posterior_csv(std::ostream& out, const Model& model, const ParticlePosterior& posterior);

}  // namespace stepdad
