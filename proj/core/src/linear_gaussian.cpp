#include <cmath>

#include "json_fields.hpp"
#include "stepdad/errors.hpp"
#include "stepdad/models.hpp"
#include "stepdad/special.hpp"

namespace stepdad {

LinearGaussian::LinearGaussian(LinearGaussianSpec spec) : spec_(spec) {
  detail::require(spec_.prior_sd > 0.0, "linear-gaussian: prior_sd must be > 0");
  detail::require(spec_.noise_sd > 0.0, "linear-gaussian: noise_sd must be > 0");
}

void LinearGaussian::sample_prior(Rng& rng, std::span<double> theta, const PriorPerturbation& p) const {
  theta[0] = spec_.prior_mean + p.shift + spec_.prior_sd * rng.normal();
}

void LinearGaussian::constrain(std::span<const double> raw, std::span<double> design,
                               std::span<double> derivative) const {
  design[0] = raw[0];
  if (!derivative.empty()) derivative[0] = 1.0;
}

void LinearGaussian::unconstrain(std::span<const double> design, std::span<double> raw) const { raw[0] = design[0]; }

double LinearGaussian::log_likelihood(std::span<const double> theta, std::span<const double> design, double y,
                                      std::span<double> d_design, double* d_outcome) const {
  const double s = spec_.noise_sd;
  const double r = (y - theta[0] * design[0]) / s;
  if (!d_design.empty()) d_design[0] = r / s * theta[0];
  if (d_outcome) *d_outcome = -r / s;
  return -0.5 * r * r - std::log(s) - kLogSqrt2Pi;
}

void LinearGaussian::validate_outcome(double y) const {
  if (!std::isfinite(y)) throw SupportError("linear-gaussian: outcome must be " + outcome_support());
}

double LinearGaussian::outcome_from_innovation(std::span<const double> theta, std::span<const double> design,
                                               double z, std::span<double> d_design) const {
  if (!d_design.empty()) d_design[0] = theta[0];
  return theta[0] * design[0] + spec_.noise_sd * z;
}

nlohmann::json LinearGaussian::config() const {
  return {{"prior_mean", spec_.prior_mean}, {"prior_sd", spec_.prior_sd}, {"noise_sd", spec_.noise_sd}};
}

}  // namespace stepdad
