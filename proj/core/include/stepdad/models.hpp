#pragma once

#include <vector>

#include "stepdad/model.hpp"

namespace stepdad {

/// Source location finding: K sources in d dimensions, noisy log total
/// intensity with inverse-square attenuation. Outcomes are log y.
struct LocationFindingSpec {
  int sources = 1;
  int dim = 2;
  std::vector<double> alpha{1.0};
  double max_signal = 1e-4;   // m
  double base_signal = 0.1;   // b
  double noise_sd = 0.5;      // sigma
};

class LocationFinding final : public Model {
 public:
  explicit LocationFinding(LocationFindingSpec spec = {});

  const LocationFindingSpec& spec() const { return spec_; }
  /// mu(theta, xi); `d_design` receives d log mu / d xi when non-empty.
  double intensity(std::span<const double> theta, std::span<const double> design, std::span<double> d_log_mu) const;

  std::string name() const override { return "location-finding"; }
  std::size_t theta_dim() const override { return static_cast<std::size_t>(spec_.sources * spec_.dim); }
  std::size_t design_dim() const override { return static_cast<std::size_t>(spec_.dim); }
  OutcomeKind outcome_kind() const override { return OutcomeKind::kLogIntensity; }
  bool reparameterizable() const override { return true; }
  std::vector<std::string> theta_names() const override;
  std::vector<DesignField> design_fields() const override;
  std::string outcome_support() const override { return "any finite real number (log intensity)"; }
  void sample_prior(Rng& rng, std::span<double> theta, const PriorPerturbation& p) const override;
  void constrain(std::span<const double> raw, std::span<double> design, std::span<double> derivative) const override;
  void unconstrain(std::span<const double> design, std::span<double> raw) const override;
  double log_likelihood(std::span<const double> theta, std::span<const double> design, double y,
                        std::span<double> d_design, double* d_outcome) const override;
  void validate_outcome(double y) const override;
  double outcome_from_innovation(std::span<const double> theta, std::span<const double> design, double z,
                                 std::span<double> d_design) const override;
  nlohmann::json config() const override;

 private:
  LocationFindingSpec spec_;
};

/// Hyperbolic temporal discounting: theta = (log k, alpha), design
/// (D days, R currency now), binary choice of the delayed option.
struct HyperbolicDiscountingSpec {
  double log_k_mean = -4.25;
  double log_k_sd = 1.5;
  double alpha_scale = 2.0;   // HalfNormal scale
  double lapse = 0.01;        // epsilon
  double max_log_delay = 50.0;
};

class HyperbolicDiscounting final : public Model {
 public:
  explicit HyperbolicDiscounting(HyperbolicDiscountingSpec spec = {});

  const HyperbolicDiscountingSpec& spec() const { return spec_; }
  /// p(y = 1 | theta, design).
  double prob_delayed(std::span<const double> theta, std::span<const double> design) const;

  std::string name() const override { return "hyperbolic-discounting"; }
  std::size_t theta_dim() const override { return 2; }
  std::size_t design_dim() const override { return 2; }
  OutcomeKind outcome_kind() const override { return OutcomeKind::kBinaryChoice; }
  bool reparameterizable() const override { return false; }
  std::vector<std::string> theta_names() const override { return {"log_k", "alpha"}; }
  std::vector<DesignField> design_fields() const override { return {{"D", "days"}, {"R", "GBP"}}; }
  std::string outcome_support() const override { return "0 (take R now) or 1 (take 100 after D days)"; }
  void sample_prior(Rng& rng, std::span<double> theta, const PriorPerturbation& p) const override;
  void constrain(std::span<const double> raw, std::span<double> design, std::span<double> derivative) const override;
  void unconstrain(std::span<const double> design, std::span<double> raw) const override;
  void random_design_distribution(std::span<double> mean, std::span<double> sd) const override;
  double log_likelihood(std::span<const double> theta, std::span<const double> design, double y,
                        std::span<double> d_design, double* d_outcome) const override;
  void validate_outcome(double y) const override;
  double outcome_from_innovation(std::span<const double> theta, std::span<const double> design, double u,
                                 std::span<double> d_design) const override;
  std::vector<double> discrete_outcomes() const override { return {0.0, 1.0}; }
  nlohmann::json config() const override;

 private:
  HyperbolicDiscountingSpec spec_;
};

/// Constant elasticity of substitution: theta = (rho, alpha_1..3, log u),
/// design = two baskets in [0,100]^3, censored slider outcome.
struct CesSpec {
  double tau = 0.005;
  double epsilon = 0x1p-22;
  double rho_a = 1.0;
  double rho_b = 1.0;
  std::vector<double> alpha_concentration{1.0, 1.0, 1.0};
  double log_u_mean = 1.0;
  double log_u_sd = 3.0;
};

class Ces final : public Model {
 public:
  explicit Ces(CesSpec spec = {});

  const CesSpec& spec() const { return spec_; }
  double utility(std::span<const double> theta, std::span<const double> basket, std::span<double> d_basket) const;
  /// Location and scale of eta; derivatives w.r.t. the 6 design components
  /// are written when the spans are non-empty.
  void eta_moments(std::span<const double> theta, std::span<const double> design, double& mu, double& sigma,
                   std::span<double> d_mu, std::span<double> d_sigma) const;

  std::string name() const override { return "ces"; }
  std::size_t theta_dim() const override { return 5; }
  std::size_t design_dim() const override { return 6; }
  OutcomeKind outcome_kind() const override { return OutcomeKind::kCensoredSlider; }
  bool reparameterizable() const override { return true; }
  std::vector<std::string> theta_names() const override { return {"rho", "alpha1", "alpha2", "alpha3", "log_u"}; }
  std::vector<DesignField> design_fields() const override;
  std::string outcome_support() const override;
  void sample_prior(Rng& rng, std::span<double> theta, const PriorPerturbation& p) const override;
  void constrain(std::span<const double> raw, std::span<double> design, std::span<double> derivative) const override;
  void unconstrain(std::span<const double> design, std::span<double> raw) const override;
  void random_design_distribution(std::span<double> mean, std::span<double> sd) const override;
  double log_likelihood(std::span<const double> theta, std::span<const double> design, double y,
                        std::span<double> d_design, double* d_outcome) const override;
  void validate_outcome(double y) const override;
  double outcome_from_innovation(std::span<const double> theta, std::span<const double> design, double z,
                                 std::span<double> d_design) const override;
  nlohmann::json config() const override;

 private:
  CesSpec spec_;
};

/// Finite toy model for exact oracles. theta is an atom index; the design
/// w = sigmoid(raw) mixes two likelihood tables:
///   p(y | theta, w) = w * A[theta][y] + (1 - w) * B[theta][y].
struct ToySpec {
  std::string name = "toy-binary";
  std::vector<double> prior_masses{0.5, 0.5};
  std::vector<std::vector<double>> table_a{{0.9, 0.1}, {0.1, 0.9}};
  std::vector<std::vector<double>> table_b{{0.9, 0.1}, {0.1, 0.9}};
};

/// Named presets: toy-binary (design-free binary channel, p(y=theta)=0.9),
/// toy-design (w selects between that channel and a noisier one),
/// toy-null (likelihood independent of theta).
ToySpec toy_preset(const std::string& name);

class ToyModel final : public Model {
 public:
  explicit ToyModel(ToySpec spec = {});

  const ToySpec& spec() const { return spec_; }
  std::size_t atom_count() const { return spec_.prior_masses.size(); }
  std::size_t outcome_count() const { return spec_.table_a.front().size(); }
  double prob(std::size_t atom, double w, std::size_t y) const;

  std::string name() const override { return spec_.name; }
  std::size_t theta_dim() const override { return 1; }
  std::size_t design_dim() const override { return 1; }
  OutcomeKind outcome_kind() const override { return OutcomeKind::kCategorical; }
  bool reparameterizable() const override { return false; }
  std::vector<std::string> theta_names() const override { return {"atom"}; }
  std::vector<DesignField> design_fields() const override { return {{"w", "mixing weight"}}; }
  std::string outcome_support() const override;
  void sample_prior(Rng& rng, std::span<double> theta, const PriorPerturbation& p) const override;
  void constrain(std::span<const double> raw, std::span<double> design, std::span<double> derivative) const override;
  void unconstrain(std::span<const double> design, std::span<double> raw) const override;
  double log_likelihood(std::span<const double> theta, std::span<const double> design, double y,
                        std::span<double> d_design, double* d_outcome) const override;
  void validate_outcome(double y) const override;
  double outcome_from_innovation(std::span<const double> theta, std::span<const double> design, double u,
                                 std::span<double> d_design) const override;
  std::vector<double> discrete_outcomes() const override;
  std::vector<ThetaAtom> prior_atoms(const PriorPerturbation& p = {}) const override;
  nlohmann::json config() const override;

 private:
  std::size_t atom_index(double theta) const;
  ToySpec spec_;
};

/// Conjugate linear-Gaussian model: theta ~ N(m0, s0^2),
/// y ~ N(theta * xi, sigma^2). Supports both gradient estimators.
struct LinearGaussianSpec {
  double prior_mean = 0.0;
  double prior_sd = 1.0;
  double noise_sd = 1.0;
};

class LinearGaussian final : public Model {
 public:
  explicit LinearGaussian(LinearGaussianSpec spec = {});

  const LinearGaussianSpec& spec() const { return spec_; }

  std::string name() const override { return "linear-gaussian"; }
  std::size_t theta_dim() const override { return 1; }
  std::size_t design_dim() const override { return 1; }
  OutcomeKind outcome_kind() const override { return OutcomeKind::kGaussian; }
  bool reparameterizable() const override { return true; }
  std::string outcome_support() const override { return "any finite real number"; }
  void sample_prior(Rng& rng, std::span<double> theta, const PriorPerturbation& p) const override;
  void constrain(std::span<const double> raw, std::span<double> design, std::span<double> derivative) const override;
  void unconstrain(std::span<const double> design, std::span<double> raw) const override;
  double log_likelihood(std::span<const double> theta, std::span<const double> design, double y,
                        std::span<double> d_design, double* d_outcome) const override;
  void validate_outcome(double y) const override;
  double outcome_from_innovation(std::span<const double> theta, std::span<const double> design, double z,
                                 std::span<double> d_design) const override;
  nlohmann::json config() const override;

 private:
  LinearGaussianSpec spec_;
};

}  // namespace stepdad
