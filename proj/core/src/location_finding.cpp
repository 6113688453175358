#include <cmath>

#include "json_fields.hpp"
#include "stepdad/errors.hpp"
#include "stepdad/models.hpp"
#include "stepdad/special.hpp"

namespace stepdad {

LocationFinding::LocationFinding(LocationFindingSpec spec) : spec_(std::move(spec)) {
  detail::require(spec_.sources >= 1, "location-finding: sources must be >= 1");
  detail::require(spec_.dim >= 1, "location-finding: dim must be >= 1");
  if (spec_.alpha.size() == 1 && spec_.sources > 1) spec_.alpha.assign(spec_.sources, spec_.alpha.front());
  detail::require(spec_.alpha.size() == static_cast<std::size_t>(spec_.sources),
                  "location-finding: alpha needs one entry per source");
  detail::require(spec_.max_signal > 0.0, "location-finding: max_signal must be > 0");
  detail::require(spec_.base_signal > 0.0, "location-finding: base_signal must be > 0");
  detail::require(spec_.noise_sd >= 0.0, "location-finding: noise_sd must be >= 0");
}

std::vector<std::string> LocationFinding::theta_names() const {
  std::vector<std::string> names;
  for (int k = 0; k < spec_.sources; ++k) {
    for (int i = 0; i < spec_.dim; ++i) names.push_back("theta" + std::to_string(k) + "_" + std::to_string(i));
  }
  return names;
}

std::vector<DesignField> LocationFinding::design_fields() const {
  std::vector<DesignField> f;
  for (int i = 0; i < spec_.dim; ++i) f.push_back({"x" + std::to_string(i), "position"});
  return f;
}

void LocationFinding::sample_prior(Rng& rng, std::span<double> theta, const PriorPerturbation& p) const {
  for (auto& v : theta) v = p.shift + rng.normal();
}

void LocationFinding::constrain(std::span<const double> raw, std::span<double> design,
                                std::span<double> derivative) const {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    design[i] = raw[i];
    if (!derivative.empty()) derivative[i] = 1.0;
  }
}

void LocationFinding::unconstrain(std::span<const double> design, std::span<double> raw) const {
  for (std::size_t i = 0; i < design.size(); ++i) raw[i] = design[i];
}

double LocationFinding::intensity(std::span<const double> theta, std::span<const double> design,
                                  std::span<double> d_log_mu) const {
  const std::size_t d = design.size();
  double mu = spec_.base_signal;
  if (!d_log_mu.empty()) std::fill(d_log_mu.begin(), d_log_mu.end(), 0.0);
  for (int k = 0; k < spec_.sources; ++k) {
    const double* src = theta.data() + k * d;
    double r2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) r2 += (src[i] - design[i]) * (src[i] - design[i]);
    const double r = std::sqrt(r2);
    const double denom = spec_.max_signal + r;
    mu += spec_.alpha[k] / (denom * denom);
    if (!d_log_mu.empty() && r > 0.0) {
      // d/dxi alpha/(m+r)^2 = -2 alpha/(m+r)^3 * (xi - theta)/r
      const double c = -2.0 * spec_.alpha[k] / (denom * denom * denom * r);
      for (std::size_t i = 0; i < d; ++i) d_log_mu[i] += c * (design[i] - src[i]);
    }
  }
  if (!d_log_mu.empty()) {
    for (auto& g : d_log_mu) g /= mu;
  }
  return mu;
}

double LocationFinding::log_likelihood(std::span<const double> theta, std::span<const double> design, double y,
                                       std::span<double> d_design, double* d_outcome) const {
  if (spec_.noise_sd <= 0.0) throw NumericError("location-finding: log-likelihood undefined for noise_sd = 0");
  const double s = spec_.noise_sd;
  const double log_mu = std::log(intensity(theta, design, d_design));
  const double r = (y - log_mu) / s;
  if (!d_design.empty()) {
    for (auto& g : d_design) g *= r / s;
  }
  if (d_outcome) *d_outcome = -r / s;
  return -0.5 * r * r - std::log(s) - kLogSqrt2Pi;
}

void LocationFinding::validate_outcome(double y) const {
  if (!std::isfinite(y)) throw SupportError("location-finding: outcome must be " + outcome_support());
}

double LocationFinding::outcome_from_innovation(std::span<const double> theta, std::span<const double> design,
                                                double z, std::span<double> d_design) const {
  const double log_mu = std::log(intensity(theta, design, d_design));
  return log_mu + spec_.noise_sd * z;
}

nlohmann::json LocationFinding::config() const {
  return {{"sources", spec_.sources},       {"dim", spec_.dim},
          {"alpha", spec_.alpha},           {"max_signal", spec_.max_signal},
          {"base_signal", spec_.base_signal}, {"noise_sd", spec_.noise_sd}};
}

}  // namespace stepdad
