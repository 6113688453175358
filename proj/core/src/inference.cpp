#include "stepdad/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stepdad/errors.hpp"
#include "stepdad/log.hpp"
#include "stepdad/special.hpp"

namespace stepdad {

ParticlePosterior ParticlePosterior::from_log_weights(std::vector<Theta> thetas, std::vector<double> log_weights,
                                                      std::size_t tau) {
  if (thetas.empty() || thetas.size() != log_weights.size()) {
    throw DimensionError("posterior: need one log-weight per particle and at least one particle");
  }
  for (double lw : log_weights) {
    if (std::isnan(lw)) throw NumericError("posterior: NaN log-weight");
  }
  const double norm = log_sum_exp(log_weights);
  if (!std::isfinite(norm)) {
    throw NumericError("posterior: the history has zero likelihood under every particle; increase n_samples");
  }
  ParticlePosterior p;
  p.thetas = std::move(thetas);
  p.tau = tau;
  p.log_weights.resize(log_weights.size());
  p.weights.resize(log_weights.size());
  p.cumulative.resize(log_weights.size());
  double acc = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    p.log_weights[i] = log_weights[i] - norm;
    p.weights[i] = std::exp(p.log_weights[i]);
    acc += p.weights[i];
    sq += p.weights[i] * p.weights[i];
  }
  const bool uniform = std::all_of(log_weights.begin(), log_weights.end(),
                                  [&](double lw) { return lw == log_weights.front(); });
  double run = 0.0;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    p.weights[i] = uniform ? 1.0 / static_cast<double>(p.size()) : p.weights[i] / acc;
    run += p.weights[i];
    p.cumulative[i] = run;
  }
  p.cumulative.back() = 1.0;
  // Equal weights give exactly n; the general formula would drift by rounding.
  p.effective_sample_size =
      uniform ? static_cast<double>(p.size()) : std::clamp(acc * acc / sq, 1.0, static_cast<double>(p.size()));
  return p;
}

std::size_t ParticlePosterior::draw_index(double u) const {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

ParticlePosterior fit_posterior_is(const Model& model, const History& history, std::size_t n_samples, Rng& rng,
                                   const PriorPerturbation& prior) {
  if (n_samples < 2) throw ConfigError("fit_posterior_is: n_samples must be >= 2");
  std::vector<Theta> thetas = sample_prior(model, rng, n_samples, prior);
  std::vector<double> logw(n_samples, 0.0);
  for (std::size_t i = 0; i < n_samples; ++i) logw[i] = history_log_likelihood(model, thetas[i].values, history);
  ParticlePosterior p = ParticlePosterior::from_log_weights(std::move(thetas), std::move(logw), history.size());
  if (p.effective_sample_size < 0.05 * static_cast<double>(n_samples)) {
    log::warn("posterior ESS " + std::to_string(p.effective_sample_size) + " is below 5% of " +
              std::to_string(n_samples) + " particles");
  }
  return p;
}

std::vector<Theta> resample(const ParticlePosterior& posterior, std::size_t n, Rng& rng) {
  if (posterior.empty()) throw NumericError("resample: empty posterior");
  std::vector<Theta> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(posterior.thetas[posterior.draw_index(rng.uniform())]);
  return out;
}

double ess(const ParticlePosterior& posterior) {
  if (posterior.empty()) return 0.0;
  const bool uniform = std::all_of(posterior.weights.begin(), posterior.weights.end(),
                                  [&](double w) { return w == posterior.weights.front(); });
  if (uniform) return static_cast<double>(posterior.size());
  double sq = 0.0;
  for (double w : posterior.weights) sq += w * w;
  return 1.0 / sq;
}

nlohmann::json PosteriorSummary::to_json() const {
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t i = 0; i < names.size(); ++i) {
    params.push_back({{"name", names[i]}, {"mean", mean[i]}, {"q05", q05[i]}, {"q50", q50[i]}, {"q95", q95[i]}});
  }
  return {{"parameters", params}, {"ess", ess}, {"particles", particles}, {"tau", tau}};
}

PosteriorSummary summarize(const Model& model, const ParticlePosterior& posterior) {
  PosteriorSummary s;
  s.names = model.theta_names();
  s.ess = posterior.effective_sample_size;
  s.particles = posterior.size();
  s.tau = posterior.tau;
  const std::size_t dim = model.theta_dim();
  std::vector<std::size_t> order(posterior.size());
  for (std::size_t d = 0; d < dim; ++d) {
    double m = 0.0;
    for (std::size_t i = 0; i < posterior.size(); ++i) m += posterior.weights[i] * posterior.thetas[i].values[d];
    s.mean.push_back(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return posterior.thetas[a].values[d] < posterior.thetas[b].values[d];
    });
    const double targets[3] = {0.05, 0.5, 0.95};
    double q[3] = {};
    std::size_t k = 0;
    double acc = 0.0;
    for (std::size_t idx : order) {
      acc += posterior.weights[idx];
      while (k < 3 && acc >= targets[k]) q[k++] = posterior.thetas[idx].values[d];
    }
    for (; k < 3; ++k) q[k] = posterior.thetas[order.back()].values[d];
    s.q05.push_back(q[0]);
    s.q50.push_back(q[1]);
    s.q95.push_back(q[2]);
  }
  return s;
}

void write_posterior_csv(std::ostream& out, const Model& model, const ParticlePosterior& posterior) {
  const auto names = model.theta_names();
  for (const auto& n : names) out << n << ',';
  out << "weight\n";
  out.precision(17);
  for (std::size_t i = 0; i < posterior.size(); ++i) {
    for (double v : posterior.thetas[i].values) out << v << ',';
    out << posterior.weights[i] << '\n';
  }
}

}  // namespace stepdad
