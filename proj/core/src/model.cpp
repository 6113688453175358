#include "stepdad/model.hpp"

#include <algorithm>
#include <cmath>

#include "stepdad/errors.hpp"

namespace stepdad {

std::string_view to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::kLogIntensity: return "continuous-log-intensity";
    case OutcomeKind::kBinaryChoice: return "binary-choice";
    case OutcomeKind::kCensoredSlider: return "censored-slider";
    case OutcomeKind::kCategorical: return "categorical";
    case OutcomeKind::kGaussian: return "gaussian";
  }
  return "gaussian";
}

std::vector<std::string> Model::theta_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < theta_dim(); ++i) names.push_back("theta" + std::to_string(i));
  return names;
}

std::vector<DesignField> Model::design_fields() const {
  std::vector<DesignField> f;
  for (std::size_t i = 0; i < design_dim(); ++i) f.push_back({"xi" + std::to_string(i), ""});
  return f;
}

void Model::random_design_distribution(std::span<double> mean, std::span<double> sd) const {
  std::fill(mean.begin(), mean.end(), 0.0);
  std::fill(sd.begin(), sd.end(), 1.0);
}

double Model::draw_innovation(Rng& rng) const { return reparameterizable() ? rng.normal() : rng.uniform(); }

std::vector<ThetaAtom> Model::prior_atoms(const PriorPerturbation&) const { return {}; }

std::vector<Theta> sample_prior(const Model& model, Rng& rng, std::size_t n, const PriorPerturbation& perturbation) {
  std::vector<Theta> out(n, Theta{std::vector<double>(model.theta_dim())});
  for (auto& t : out) model.sample_prior(rng, t.values, perturbation);
  return out;
}

Design constrain_design(const Model& model, const RawDesign& raw) {
  if (raw.values.size() != model.design_dim()) {
    throw DimensionError(model.name() + ": raw design has width " + std::to_string(raw.values.size()) +
                         ", expected " + std::to_string(model.design_dim()));
  }
  Design d{std::vector<double>(model.design_dim())};
  model.constrain(raw.values, d.values, {});
  return d;
}

RawDesign unconstrain_design(const Model& model, const Design& design) {
  if (design.values.size() != model.design_dim()) {
    throw DimensionError(model.name() + ": design has width " + std::to_string(design.values.size()));
  }
  RawDesign r{std::vector<double>(model.design_dim())};
  model.unconstrain(design.values, r.values);
  return r;
}

double log_likelihood(const Model& model, const Theta& theta, const Design& design, const Outcome& outcome) {
  if (outcome.kind != model.outcome_kind()) {
    throw SupportError(model.name() + ": outcome kind " + std::string(to_string(outcome.kind)) +
                       " does not match model kind " + std::string(to_string(model.outcome_kind())));
  }
  if (theta.values.size() != model.theta_dim() || design.values.size() != model.design_dim()) {
    throw DimensionError(model.name() + ": theta/design width mismatch in log_likelihood");
  }
  model.validate_outcome(outcome.value);
  return model.log_likelihood(theta.values, design.values, outcome.value, {}, nullptr);
}

SampledOutcome sample_outcome(const Model& model, const Theta& theta, const Design& design, Rng& rng) {
  const double innovation = model.draw_innovation(rng);
  SampledOutcome s;
  s.outcome = {model.outcome_from_innovation(theta.values, design.values, innovation, {}), model.outcome_kind()};
  s.has_innovation = model.reparameterizable();
  s.innovation = s.has_innovation ? innovation : 0.0;
  return s;
}

}  // namespace stepdad
