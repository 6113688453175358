#include "stepdad/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "stepdad/errors.hpp"

namespace stepdad {

FiniteDiffReport finite_diff_check(const LossWithGradient& loss, std::span<const double> params, double h) {
  FiniteDiffReport report;
  std::vector<double> p(params.begin(), params.end());
  const double f0 = loss(p, &report.analytic);
  const double f1 = loss(p, nullptr);
  if (std::memcmp(&f0, &f1, sizeof(double)) != 0) {
    throw NumericError("finite_diff_check: loss is not deterministic (two evaluations differ)");
  }
  if (report.analytic.size() != p.size()) {
    throw DimensionError("finite_diff_check: analytic gradient has the wrong length");
  }
  report.numeric.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double up = loss(p, nullptr);
    p[i] = orig - h;
    const double down = loss(p, nullptr);
    p[i] = orig;
    report.numeric[i] = (up - down) / (2.0 * h);
    const double err =
        std::abs(report.analytic[i] - report.numeric[i]) / std::max(1e-12, std::abs(report.numeric[i]));
    if (err > report.max_relative_error || std::isnan(err)) {
      report.max_relative_error = std::isnan(err) ? INFINITY : err;
      report.worst_index = i;
    }
  }
  return report;
}

std::vector<double> flatten(std::span<const Tensor* const> tensors) {
  std::vector<double> out;
  for (const Tensor* t : tensors) out.insert(out.end(), t->values().begin(), t->values().end());
  return out;
}

void unflatten(std::span<const double> flat, std::span<Tensor* const> tensors) {
  std::size_t pos = 0;
  for (Tensor* t : tensors) {
    if (pos + t->size() > flat.size()) throw DimensionError("unflatten: flat vector too short");
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), t->size(), t->data());
    pos += t->size();
  }
  if (pos != flat.size()) throw DimensionError("unflatten: flat vector too long");
}

}  // namespace stepdad
