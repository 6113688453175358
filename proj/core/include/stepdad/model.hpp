#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stepdad/rng.hpp"

namespace stepdad {

/// Latent parameter vector; layout is declared by the owning model.
struct Theta {
  std::vector<double> values;
  friend bool operator==(const Theta&, const Theta&) = default;
};

/// Unconstrained design as emitted by a policy network.
struct RawDesign {
  std::vector<double> values;
  friend bool operator==(const RawDesign&, const RawDesign&) = default;
};

/// Design in the model's constrained space, with units.
struct Design {
  std::vector<double> values;
  friend bool operator==(const Design&, const Design&) = default;
};

enum class OutcomeKind { kLogIntensity, kBinaryChoice, kCensoredSlider, kCategorical, kGaussian };

std::string_view to_string(OutcomeKind kind);

struct Outcome {
  double value = 0.0;
  OutcomeKind kind = OutcomeKind::kGaussian;
  friend bool operator==(const Outcome&, const Outcome&) = default;
};

struct DesignField {
  std::string name;
  std::string unit;
};

/// Test-time change of prior. Continuous models shift their location
/// parameter(s) by `shift`; discrete models replace prior masses.
struct PriorPerturbation {
  double shift = 0.0;
  std::vector<double> masses;

  bool is_identity() const { return shift == 0.0 && masses.empty(); }
};

struct ThetaAtom {
  Theta theta;
  double mass;
};

/// Result of sample_outcome: the outcome and, for reparameterizable kinds,
/// the standard-normal innovation that produced it.
struct SampledOutcome {
  Outcome outcome;
  bool has_innovation = false;
  double innovation = 0.0;
};

/// Generative model p(theta) p(y | theta, design).
///
/// The span-based virtuals are the hot path used by rollouts; the free
/// functions below wrap them with the strong types.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  virtual std::size_t theta_dim() const = 0;
  /// Width of both raw and constrained designs.
  virtual std::size_t design_dim() const = 0;
  virtual OutcomeKind outcome_kind() const = 0;
  /// True when outcomes are a differentiable function of (design, innovation).
  virtual bool reparameterizable() const = 0;

  virtual std::vector<std::string> theta_names() const;
  virtual std::vector<DesignField> design_fields() const;
  virtual std::string outcome_support() const = 0;

  virtual void sample_prior(Rng& rng, std::span<double> theta, const PriorPerturbation& perturbation) const = 0;

  /// Elementwise transform raw -> constrained. `derivative`, when non-empty,
  /// receives d design_i / d raw_i.
  virtual void constrain(std::span<const double> raw, std::span<double> design,
                         std::span<double> derivative) const = 0;
  virtual void unconstrain(std::span<const double> design, std::span<double> raw) const = 0;

  /// Per-coordinate normal on the raw scale used by the random baseline.
  virtual void random_design_distribution(std::span<double> mean, std::span<double> sd) const;

  /// log p(y | theta, design). When `d_design` is non-empty it receives the
  /// partial derivatives w.r.t. the constrained design; when `d_outcome` is
  /// non-null it receives the partial w.r.t. y.
  virtual double log_likelihood(std::span<const double> theta, std::span<const double> design, double y,
                                std::span<double> d_design, double* d_outcome) const = 0;

  /// Throws SupportError when y is outside the outcome support.
  virtual void validate_outcome(double y) const = 0;

  /// Standard normal for reparameterizable kinds, uniform(0,1) otherwise.
  virtual double draw_innovation(Rng& rng) const;

  /// Deterministic outcome map. `d_design`, when non-empty, receives
  /// dy/d design (zero for discrete outcomes).
  virtual double outcome_from_innovation(std::span<const double> theta, std::span<const double> design,
                                         double innovation, std::span<double> d_design) const = 0;

  /// Finite outcome set for discrete models; empty for continuous ones.
  virtual std::vector<double> discrete_outcomes() const { return {}; }
  /// Finite prior support; empty for continuous priors.
  virtual std::vector<ThetaAtom> prior_atoms(const PriorPerturbation& perturbation = {}) const;

  virtual nlohmann::json config() const = 0;
};

std::vector<Theta> sample_prior(const Model& model, Rng& rng, std::size_t n, const PriorPerturbation& perturbation = {});
Design constrain_design(const Model& model, const RawDesign& raw);
RawDesign unconstrain_design(const Model& model, const Design& design);
double log_likelihood(const Model& model, const Theta& theta, const Design& design, const Outcome& outcome);
SampledOutcome sample_outcome(const Model& model, const Theta& theta, const Design& design, Rng& rng);

/// Builds a model from its name plus an optional config block (constants
/// overriding the defaults). Unknown names or keys throw ConfigError.
std::unique_ptr<Model> make_model(const std::string& name, const nlohmann::json& config = nlohmann::json::object());
std::vector<std::string> model_names();

}  // namespace stepdad
