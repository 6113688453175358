#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "stepdad/tensor.hpp"

namespace stepdad {

/// Loss evaluated at a flat parameter vector. When `grad` is non-null the
/// callee writes the analytic gradient (same length as params).
using LossWithGradient = std::function<double(std::span<const double> params, std::vector<double>* grad)>;

struct FiniteDiffReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

/// Compares the analytic gradient against central differences with step h.
/// Relative error per coordinate is |g_a - g_fd| / max(1e-12, |g_fd|).
/// Throws NumericError if two evaluations at the same point disagree.
FiniteDiffReport finite_diff_check(const LossWithGradient& loss, std::span<const double> params,
                                   double h = 1e-5);

std::vector<double> flatten(std::span<const Tensor* const> tensors);
void unflatten(std::span<const double> flat, std::span<Tensor* const> tensors);

}  // namespace stepdad
