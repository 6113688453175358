#include <algorithm>
#include <cmath>
#include <limits>

#include "json_fields.hpp"
#include "stepdad/errors.hpp"
#include "stepdad/models.hpp"
#include "stepdad/special.hpp"

namespace stepdad {

namespace {

constexpr double kFuture = 100.0;
constexpr double kMaxRawReward = 700.0;

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

HyperbolicDiscounting::HyperbolicDiscounting(HyperbolicDiscountingSpec spec) : spec_(spec) {
  detail::require(spec_.log_k_sd > 0.0, "hyperbolic-discounting: log_k_sd must be > 0");
  detail::require(spec_.alpha_scale > 0.0, "hyperbolic-discounting: alpha_scale must be > 0");
  detail::require(spec_.lapse >= 0.0 && spec_.lapse < 0.5, "hyperbolic-discounting: lapse must be in [0, 0.5)");
}

void HyperbolicDiscounting::sample_prior(Rng& rng, std::span<double> theta, const PriorPerturbation& p) const {
  theta[0] = spec_.log_k_mean + p.shift + spec_.log_k_sd * rng.normal();
  theta[1] = spec_.alpha_scale * std::abs(rng.normal());
}

void HyperbolicDiscounting::constrain(std::span<const double> raw, std::span<double> design,
                                      std::span<double> derivative) const {
  const double xd = std::min(raw[0], spec_.max_log_delay);
  design[0] = std::exp(xd);
  const double xr = std::clamp(raw[1], -kMaxRawReward, kMaxRawReward);
  const double s = sigmoid(xr);
  design[1] = std::clamp(kFuture * s, std::numeric_limits<double>::min(), std::nextafter(kFuture, 0.0));
  if (!derivative.empty()) {
    derivative[0] = raw[0] < spec_.max_log_delay ? design[0] : 0.0;
    derivative[1] = std::abs(raw[1]) < kMaxRawReward ? kFuture * s * (1.0 - s) : 0.0;
  }
}

void HyperbolicDiscounting::unconstrain(std::span<const double> design, std::span<double> raw) const {
  if (!(design[0] > 0.0) || !(design[1] > 0.0 && design[1] < kFuture)) {
    throw DimensionError("hyperbolic-discounting: design needs D > 0 and 0 < R < 100");
  }
  raw[0] = std::log(design[0]);
  raw[1] = logit(design[1] / kFuture);
}

void HyperbolicDiscounting::random_design_distribution(std::span<double> mean, std::span<double> sd) const {
  mean[0] = 3.0;
  sd[0] = 2.0;
  mean[1] = 0.0;
  sd[1] = 2.0;
}

double HyperbolicDiscounting::prob_delayed(std::span<const double> theta, std::span<const double> design) const {
  const double k = std::exp(theta[0]);
  const double v1 = kFuture / (1.0 + k * design[0]);
  const double z = (v1 - design[1]) / theta[1];
  return spec_.lapse + (1.0 - 2.0 * spec_.lapse) * normal_cdf(z);
}

double HyperbolicDiscounting::log_likelihood(std::span<const double> theta, std::span<const double> design,
                                             double y, std::span<double> d_design, double* d_outcome) const {
  const double k = std::exp(theta[0]);
  const double alpha = theta[1];
  const double denom = 1.0 + k * design[0];
  const double v1 = kFuture / denom;
  const double z = (v1 - design[1]) / alpha;
  const double eps = spec_.lapse;
  const double p1 = eps + (1.0 - 2.0 * eps) * normal_cdf(z);
  const bool chose_delayed = y == 1.0;
  const double p = chose_delayed ? p1 : 1.0 - p1;
  if (!d_design.empty()) {
    const double dp_dz = (1.0 - 2.0 * eps) * std::exp(normal_log_pdf(z));
    const double dl_dz = (chose_delayed ? dp_dz : -dp_dz) / p;
    d_design[0] = dl_dz * (-kFuture * k / (denom * denom)) / alpha;
    d_design[1] = dl_dz * (-1.0 / alpha);
  }
  if (d_outcome) *d_outcome = 0.0;
  return std::log(p);
}

void HyperbolicDiscounting::validate_outcome(double y) const {
  if (y != 0.0 && y != 1.0) throw SupportError("hyperbolic-discounting: outcome must be " + outcome_support());
}

double HyperbolicDiscounting::outcome_from_innovation(std::span<const double> theta, std::span<const double> design,
                                                      double u, std::span<double> d_design) const {
  if (!d_design.empty()) std::fill(d_design.begin(), d_design.end(), 0.0);
  return u < prob_delayed(theta, design) ? 1.0 : 0.0;
}

nlohmann::json HyperbolicDiscounting::config() const {
  return {{"log_k_mean", spec_.log_k_mean}, {"log_k_sd", spec_.log_k_sd},
          {"alpha_scale", spec_.alpha_scale}, {"lapse", spec_.lapse},
          {"max_log_delay", spec_.max_log_delay}};
}

}  // namespace stepdad
