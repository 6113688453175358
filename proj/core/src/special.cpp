#include "stepdad/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stepdad {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double log_normal_cdf(double x) {
  if (x > 5.0) return std::log1p(-0.5 * std::erfc(x / std::sqrt(2.0)));
  if (x > -20.0) return std::log(0.5 * std::erfc(-x / std::sqrt(2.0)));
  // Asymptotic tail: Phi(x) ~ phi(x)/(-x) * (1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8)
  const double z = 1.0 / (x * x);
  const double series = 1.0 - z * (1.0 - z * (3.0 - z * (15.0 - 105.0 * z)));
  return normal_log_pdf(x) - std::log(-x) + std::log(series);
}

double log_normal_cdf_derivative(double x) {
  if (x > 5.0) return std::exp(normal_log_pdf(x)) / normal_cdf(x);
  return std::exp(normal_log_pdf(x) - log_normal_cdf(x));
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace stepdad
