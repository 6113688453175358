#include "stepdad/theta_source.hpp"

#include <sstream>

#include "stepdad/errors.hpp"

namespace stepdad {

ThetaSource ThetaSource::prior(const Model& model) {
  ThetaSource s;
  s.model_ = &model;
  return s;
}

ThetaSource ThetaSource::perturbed(const Model& model, PriorPerturbation perturbation) {
  ThetaSource s;
  s.kind_ = ThetaSourceKind::kPerturbed;
  s.model_ = &model;
  s.perturbation_ = std::move(perturbation);
  return s;
}

ThetaSource ThetaSource::particles(const Model& model, std::shared_ptr<const ParticlePosterior> posterior) {
  if (!posterior || posterior->empty()) throw NumericError("theta source: empty particle posterior");
  for (const auto& t : posterior->thetas) {
    if (t.values.size() != model.theta_dim()) throw DimensionError("theta source: particle width mismatch");
  }
  ThetaSource s;
  s.kind_ = ThetaSourceKind::kParticles;
  s.model_ = &model;
  s.posterior_ = std::move(posterior);
  return s;
}

std::string ThetaSource::tag() const {
  switch (kind_) {
    case ThetaSourceKind::kPrior: return "prior";
    case ThetaSourceKind::kParticles: return "particles";
    case ThetaSourceKind::kPerturbed: {
      std::ostringstream o;
      o << "perturbed(shift=" << perturbation_.shift;
      if (!perturbation_.masses.empty()) {
        o << ";masses=";
        for (std::size_t i = 0; i < perturbation_.masses.size(); ++i) o << (i ? " " : "") << perturbation_.masses[i];
      }
      o << ")";
      return o.str();
    }
  }
  return "prior";
}

void ThetaSource::draw(Rng& rng, std::span<double> theta) const {
  if (kind_ == ThetaSourceKind::kParticles) {
    const auto& v = posterior_->thetas[posterior_->draw_index(rng.uniform())].values;
    std::copy(v.begin(), v.end(), theta.begin());
    return;
  }
  model_->sample_prior(rng, theta, perturbation_);
}

std::vector<ThetaAtom> ThetaSource::atoms() const {
  if (kind_ == ThetaSourceKind::kParticles) {
    std::vector<ThetaAtom> out;
    for (std::size_t i = 0; i < posterior_->size(); ++i) {
      if (posterior_->weights[i] > 0.0) out.push_back({posterior_->thetas[i], posterior_->weights[i]});
    }
    return out;
  }
  return model_->prior_atoms(perturbation_);
}

}  // namespace stepdad
