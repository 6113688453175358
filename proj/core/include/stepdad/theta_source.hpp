#pragma once

#include <memory>
#include <string>

#include "stepdad/inference.hpp"
#include "stepdad/model.hpp"

namespace stepdad {

enum class ThetaSourceKind { kPrior, kParticles, kPerturbed };

/// Distribution the bounds draw theta_0 and the contrasts from.
class ThetaSource {
 public:
  static ThetaSource prior(const Model& model);
  static ThetaSource perturbed(const Model& model, PriorPerturbation perturbation);
  static ThetaSource particles(const Model& model, std::shared_ptr<const ParticlePosterior> posterior);

  ThetaSourceKind kind() const { return kind_; }
  const Model& model() const { return *model_; }
  const PriorPerturbation& perturbation() const { return perturbation_; }
  const ParticlePosterior* posterior() const { return posterior_.get(); }

  /// "prior", "particles" or "perturbed(shift=...)".
  std::string tag() const;

  void draw(Rng& rng, std::span<double> theta) const;

  /// Finite support with masses, for exact enumeration. Empty when the
  /// source is continuous.
  std::vector<ThetaAtom> atoms() const;

 private:
  ThetaSource() = default;
  ThetaSourceKind kind_ = ThetaSourceKind::kPrior;
  const Model* model_ = nullptr;
  PriorPerturbation perturbation_;
  std::shared_ptr<const ParticlePosterior> posterior_;
};

}  // namespace stepdad
