#pragma once

#include <span>

namespace stepdad {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_cdf(double x);
double normal_log_pdf(double x);
/// log Phi(x), accurate far into the lower tail.
double log_normal_cdf(double x);
/// d/dx log Phi(x) = phi(x) / Phi(x).
double log_normal_cdf_derivative(double x);

double logit(double p);
double log_sum_exp(std::span<const double> v);

}  // namespace stepdad
