#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stepdad/rollout.hpp"

namespace stepdad {

enum class BoundKind { kSpce, kSnmc, kPce };

std::string_view to_string(BoundKind k);

/// Monte Carlo estimate of an EIG bound, in nats.
struct BoundEstimate {
  BoundKind kind = BoundKind::kSpce;
  double value = 0.0;
  double se = 0.0;
  std::size_t n = 0;
  std::size_t l = 0;
  std::size_t tau = 0;
  std::string source = "prior";
  std::uint64_t seed = 0;
  bool exact = false;
};

struct BoundOptions {
  std::size_t T = 0;
  std::size_t L = 1023;
  std::size_t N = 256;
  std::uint64_t seed = 0;
  /// Replace sampled contrasts and outer rollouts by full enumeration over
  /// a finite theta support and finite outcome set. Both bounds then equal
  /// the exact (remaining) EIG.
  bool exact = false;
  std::size_t chunk = 256;
};

/// Lower (sPCE, or PCE for static designs) and upper (sNMC) estimates from
/// the same rollouts and the same contrasts.
struct PairedBounds {
  BoundEstimate lower;
  BoundEstimate upper;
  std::vector<double> lower_terms;  // per rollout
  std::vector<double> upper_terms;
  double gap_se = 0.0;  // s.e. of (upper - lower) from paired differences
};

PairedBounds estimate_bounds(const Model& model, const DesignPolicy& policy, const ThetaSource& source,
                             const History& prefix, const BoundOptions& options);
BoundEstimate spce(const Model& model, const DesignPolicy& policy, const ThetaSource& source, const History& prefix,
                   const BoundOptions& options);
BoundEstimate snmc(const Model& model, const DesignPolicy& policy, const ThetaSource& source, const History& prefix,
                   const BoundOptions& options);

std::string bound_csv_header();
std::string bound_csv_row(const BoundEstimate& b);

enum class GradMode { kPathwise, kScore };

std::string_view to_string(GradMode m);
GradMode grad_mode_from_string(std::string_view s);
/// Pathwise for reparameterizable models, score otherwise.
GradMode default_grad_mode(const Model& model);

struct GradientOptions {
  std::size_t T = 0;
  std::size_t L = 1023;
  std::size_t N = 256;
  std::uint64_t seed = 0;
  GradMode mode = GradMode::kPathwise;
};

struct PolicyGradient {
  double objective = 0.0;  // mean sPCE integrand over the batch
  double se = 0.0;
  PolicyParams grads;      // d objective / d params (ascent direction)
};

struct DesignGradient {
  double objective = 0.0;
  double se = 0.0;
  Tensor grads;  // d objective / d static raw designs (T x design_dim)
};

/// Gradient of the (conditional, when `prefix` is non-empty) sPCE objective.
/// Score mode adds (f - b) * sum_t d log p(y_t | theta_0, xi_t) with b the
/// leave-one-out batch mean of f.
PolicyGradient spce_gradient(const Model& model, const PolicyParams& policy, const ThetaSource& source,
                             const History& prefix, const GradientOptions& options);
DesignGradient pce_gradient(const Model& model, const Tensor& static_raw, const ThetaSource& source,
                            const History& prefix, const GradientOptions& options);

}  // namespace stepdad
