#include <algorithm>
#include <cmath>

#include "json_fields.hpp"
#include "stepdad/errors.hpp"
#include "stepdad/models.hpp"
#include "stepdad/special.hpp"

namespace stepdad {

namespace {

constexpr double kBasketMax = 100.0;
constexpr double kMaxRaw = 700.0;
constexpr int kGoods = 3;

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

Ces::Ces(CesSpec spec) : spec_(std::move(spec)) {
  detail::require(spec_.tau > 0.0, "ces: tau must be > 0");
  detail::require(spec_.epsilon > 0.0 && spec_.epsilon < 0.5, "ces: epsilon must be in (0, 0.5)");
  detail::require(spec_.rho_a > 0.0 && spec_.rho_b > 0.0, "ces: rho Beta parameters must be > 0");
  detail::require(spec_.alpha_concentration.size() == kGoods, "ces: alpha_concentration needs 3 entries");
  for (double c : spec_.alpha_concentration) detail::require(c > 0.0, "ces: alpha_concentration must be > 0");
  detail::require(spec_.log_u_sd > 0.0, "ces: log_u_sd must be > 0");
}

std::vector<DesignField> Ces::design_fields() const {
  return {{"x1", "units of good 1"},  {"x2", "units of good 2"},  {"x3", "units of good 3"},
          {"x1'", "units of good 1"}, {"x2'", "units of good 2"}, {"x3'", "units of good 3"}};
}

std::string Ces::outcome_support() const {
  return "slider value in [" + std::to_string(spec_.epsilon) + ", 1 - " + std::to_string(spec_.epsilon) +
         "] (epsilon = 2^-22 by default)";
}

void Ces::sample_prior(Rng& rng, std::span<double> theta, const PriorPerturbation& p) const {
  theta[0] = rng.beta(spec_.rho_a, spec_.rho_b);
  double g[kGoods];
  double total = 0.0;
  for (int i = 0; i < kGoods; ++i) total += g[i] = rng.gamma(spec_.alpha_concentration[i]);
  for (int i = 0; i < kGoods; ++i) theta[1 + i] = g[i] / total;
  theta[4] = spec_.log_u_mean + p.shift + spec_.log_u_sd * rng.normal();
}

void Ces::constrain(std::span<const double> raw, std::span<double> design, std::span<double> derivative) const {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double r = std::clamp(raw[i], -kMaxRaw, kMaxRaw);
    const double s = sigmoid(r);
    design[i] = kBasketMax * s;
    if (!derivative.empty()) derivative[i] = std::abs(raw[i]) < kMaxRaw ? kBasketMax * s * (1.0 - s) : 0.0;
  }
}

void Ces::unconstrain(std::span<const double> design, std::span<double> raw) const {
  for (std::size_t i = 0; i < design.size(); ++i) {
    if (!(design[i] > 0.0 && design[i] < kBasketMax)) throw DimensionError("ces: basket entries must be in (0, 100)");
    raw[i] = logit(design[i] / kBasketMax);
  }
}

void Ces::random_design_distribution(std::span<double> mean, std::span<double> sd) const {
  std::fill(mean.begin(), mean.end(), 0.0);
  std::fill(sd.begin(), sd.end(), 2.0);
}

double Ces::utility(std::span<const double> theta, std::span<const double> basket, std::span<double> d_basket) const {
  const double rho = theta[0];
  double s = 0.0;
  for (int i = 0; i < kGoods; ++i) s += theta[1 + i] * std::pow(basket[i], rho);
  if (!(s > 0.0)) {
    if (!d_basket.empty()) std::fill(d_basket.begin(), d_basket.end(), 0.0);
    return 0.0;
  }
  const double u = std::exp(std::log(s) / rho);
  if (!d_basket.empty()) {
    // dU/dx_i = U^(1 - rho) alpha_i x_i^(rho - 1)
    const double lead = u / s;
    for (int i = 0; i < kGoods; ++i) {
      d_basket[i] = basket[i] > 0.0 ? lead * theta[1 + i] * std::pow(basket[i], rho - 1.0) : 0.0;
    }
  }
  return u;
}

void Ces::eta_moments(std::span<const double> theta, std::span<const double> design, double& mu, double& sigma,
                      std::span<double> d_mu, std::span<double> d_sigma) const {
  const double scale = std::exp(theta[4]);
  const bool grads = !d_mu.empty();
  double du_a[kGoods] = {}, du_b[kGoods] = {};
  const double ua = utility(theta, design.subspan(0, kGoods), grads ? std::span<double>(du_a) : std::span<double>());
  const double ub =
      utility(theta, design.subspan(kGoods, kGoods), grads ? std::span<double>(du_b) : std::span<double>());
  double dist2 = 0.0;
  for (int i = 0; i < kGoods; ++i) dist2 += (design[i] - design[kGoods + i]) * (design[i] - design[kGoods + i]);
  const double dist = std::sqrt(dist2);
  mu = (ua - ub) * scale;
  sigma = (1.0 + dist) * spec_.tau * scale;
  if (grads) {
    for (int i = 0; i < kGoods; ++i) {
      d_mu[i] = du_a[i] * scale;
      d_mu[kGoods + i] = -du_b[i] * scale;
      const double ds = dist > 0.0 ? spec_.tau * scale * (design[i] - design[kGoods + i]) / dist : 0.0;
      d_sigma[i] = ds;
      d_sigma[kGoods + i] = -ds;
    }
  }
}

double Ces::log_likelihood(std::span<const double> theta, std::span<const double> design, double y,
                           std::span<double> d_design, double* d_outcome) const {
  const bool grads = !d_design.empty();
  double mu = 0.0, sigma = 0.0;
  double d_mu[2 * kGoods] = {}, d_sigma[2 * kGoods] = {};
  eta_moments(theta, design, mu, sigma, grads ? std::span<double>(d_mu) : std::span<double>(),
              grads ? std::span<double>(d_sigma) : std::span<double>());
  if (!(sigma > 0.0)) throw NumericError("ces: sigma_eta must be > 0, got " + std::to_string(sigma));

  const double eps = spec_.epsilon;
  double value = 0.0, dl_dmu = 0.0, dl_dsigma = 0.0, dl_dy = 0.0;
  if (y <= eps || y >= 1.0 - eps) {
    const bool lower = y <= eps;
    const double a = lower ? (logit(eps) - mu) / sigma : (mu - logit(1.0 - eps)) / sigma;
    value = log_normal_cdf(a);
    const double lam = log_normal_cdf_derivative(a);
    dl_dmu = lam * (lower ? -1.0 : 1.0) / sigma;
    dl_dsigma = -lam * a / sigma;
  } else {
    const double l = logit(y);
    const double r = (l - mu) / sigma;
    const double jac = y * (1.0 - y);
    value = -0.5 * r * r - std::log(sigma) - kLogSqrt2Pi - std::log(jac);
    dl_dmu = r / sigma;
    dl_dsigma = (r * r - 1.0) / sigma;
    dl_dy = -r / (sigma * jac) - (1.0 - 2.0 * y) / jac;
  }
  if (grads) {
    for (int i = 0; i < 2 * kGoods; ++i) d_design[i] = dl_dmu * d_mu[i] + dl_dsigma * d_sigma[i];
  }
  if (d_outcome) *d_outcome = dl_dy;
  return value;
}

void Ces::validate_outcome(double y) const {
  if (!(y >= spec_.epsilon && y <= 1.0 - spec_.epsilon)) throw SupportError("ces: outcome must be " + outcome_support());
}

double Ces::outcome_from_innovation(std::span<const double> theta, std::span<const double> design, double z,
                                    std::span<double> d_design) const {
  const bool grads = !d_design.empty();
  double mu = 0.0, sigma = 0.0;
  double d_mu[2 * kGoods] = {}, d_sigma[2 * kGoods] = {};
  eta_moments(theta, design, mu, sigma, grads ? std::span<double>(d_mu) : std::span<double>(),
              grads ? std::span<double>(d_sigma) : std::span<double>());
  const double eta = mu + sigma * z;
  const double s = sigmoid(eta);
  const double eps = spec_.epsilon;
  const double y = std::clamp(s, eps, 1.0 - eps);
  if (grads) {
    // Hard censoring: the clipped outcome is flat in the design.
    const bool interior = s > eps && s < 1.0 - eps;
    const double ds = interior ? s * (1.0 - s) : 0.0;
    for (int i = 0; i < 2 * kGoods; ++i) d_design[i] = ds * (d_mu[i] + z * d_sigma[i]);
  }
  return y;
}

nlohmann::json Ces::config() const {
  return {{"tau", spec_.tau},
          {"epsilon", spec_.epsilon},
          {"rho_a", spec_.rho_a},
          {"rho_b", spec_.rho_b},
          {"alpha_concentration", spec_.alpha_concentration},
          {"log_u_mean", spec_.log_u_mean},
          {"log_u_sd", spec_.log_u_sd}};
}

}  // namespace stepdad
