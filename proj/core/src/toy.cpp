#include <cmath>
#include <numeric>

#include "json_fields.hpp"
#include "stepdad/errors.hpp"
#include "stepdad/models.hpp"

namespace stepdad {

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

void check_table(const std::vector<std::vector<double>>& t, std::size_t atoms, const std::string& label) {
  detail::require(t.size() == atoms, "toy: " + label + " needs one row per theta atom");
  const std::size_t width = t.front().size();
  detail::require(width >= 2, "toy: " + label + " needs at least two outcomes");
  for (const auto& row : t) {
    detail::require(row.size() == width, "toy: " + label + " rows must have equal width");
    double sum = 0.0;
    for (double p : row) {
      detail::require(p >= 0.0, "toy: " + label + " entries must be >= 0");
      sum += p;
    }
    detail::require(std::abs(sum - 1.0) < 1e-12, "toy: " + label + " rows must sum to 1");
  }
}

std::vector<double> normalized_masses(const std::vector<double>& masses, std::size_t atoms) {
  detail::require(masses.size() == atoms, "toy: prior masses need one entry per atom");
  double total = 0.0;
  for (double m : masses) {
    detail::require(m >= 0.0, "toy: prior masses must be >= 0");
    total += m;
  }
  detail::require(total > 0.0, "toy: prior masses must not all be zero");
  std::vector<double> out(masses);
  for (auto& m : out) m /= total;
  return out;
}

}  // namespace

ToySpec toy_preset(const std::string& name) {
  ToySpec s;
  s.name = name;
  const std::vector<std::vector<double>> channel{{0.9, 0.1}, {0.1, 0.9}};
  if (name == "toy-binary" || name == "toy") {
    s.table_a = s.table_b = channel;
  } else if (name == "toy-design") {
    s.table_a = channel;
    s.table_b = {{0.6, 0.4}, {0.3, 0.7}};
  } else if (name == "toy-null") {
    s.table_a = s.table_b = {{0.7, 0.3}, {0.7, 0.3}};
  } else {
    throw ConfigError("unknown toy preset '" + name + "'");
  }
  return s;
}

ToyModel::ToyModel(ToySpec spec) : spec_(std::move(spec)) {
  detail::require(!spec_.prior_masses.empty(), "toy: prior masses must not be empty");
  spec_.prior_masses = normalized_masses(spec_.prior_masses, spec_.prior_masses.size());
  check_table(spec_.table_a, atom_count(), "table_a");
  check_table(spec_.table_b, atom_count(), "table_b");
  detail::require(spec_.table_a.front().size() == spec_.table_b.front().size(),
                  "toy: table_a and table_b must have the same outcome count");
}

std::string ToyModel::outcome_support() const {
  return "integer category in {0, ..., " + std::to_string(outcome_count() - 1) + "}";
}

std::size_t ToyModel::atom_index(double theta) const {
  const auto i = static_cast<long long>(theta);
  if (static_cast<double>(i) != theta || i < 0 || static_cast<std::size_t>(i) >= atom_count()) {
    throw DimensionError("toy: theta must be an atom index, got " + std::to_string(theta));
  }
  return static_cast<std::size_t>(i);
}

double ToyModel::prob(std::size_t atom, double w, std::size_t y) const {
  return w * spec_.table_a[atom][y] + (1.0 - w) * spec_.table_b[atom][y];
}

void ToyModel::sample_prior(Rng& rng, std::span<double> theta, const PriorPerturbation& p) const {
  const auto masses = p.masses.empty() ? spec_.prior_masses : normalized_masses(p.masses, atom_count());
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t chosen = atom_count() - 1;
  for (std::size_t i = 0; i < atom_count(); ++i) {
    acc += masses[i];
    if (u < acc) {
      chosen = i;
      break;
    }
  }
  theta[0] = static_cast<double>(chosen);
}

void ToyModel::constrain(std::span<const double> raw, std::span<double> design, std::span<double> derivative) const {
  const double w = sigmoid(raw[0]);
  design[0] = w;
  if (!derivative.empty()) derivative[0] = w * (1.0 - w);
}

void ToyModel::unconstrain(std::span<const double> design, std::span<double> raw) const {
  const double w = design[0];
  if (!(w > 0.0 && w < 1.0)) throw DimensionError("toy: mixing weight must be in (0, 1)");
  raw[0] = std::log(w / (1.0 - w));
}

double ToyModel::log_likelihood(std::span<const double> theta, std::span<const double> design, double y,
                                std::span<double> d_design, double* d_outcome) const {
  const std::size_t atom = atom_index(theta[0]);
  const auto cat = static_cast<std::size_t>(y);
  const double p = prob(atom, design[0], cat);
  if (!d_design.empty()) d_design[0] = (spec_.table_a[atom][cat] - spec_.table_b[atom][cat]) / p;
  if (d_outcome) *d_outcome = 0.0;
  return std::log(p);
}

void ToyModel::validate_outcome(double y) const {
  const auto i = static_cast<long long>(y);
  if (!(y >= 0.0) || static_cast<double>(i) != y || static_cast<std::size_t>(i) >= outcome_count()) {
    throw SupportError("toy: outcome must be " + outcome_support());
  }
}

double ToyModel::outcome_from_innovation(std::span<const double> theta, std::span<const double> design, double u,
                                         std::span<double> d_design) const {
  if (!d_design.empty()) d_design[0] = 0.0;
  const std::size_t atom = atom_index(theta[0]);
  double acc = 0.0;
  for (std::size_t y = 0; y + 1 < outcome_count(); ++y) {
    acc += prob(atom, design[0], y);
    if (u < acc) return static_cast<double>(y);
  }
  return static_cast<double>(outcome_count() - 1);
}

std::vector<double> ToyModel::discrete_outcomes() const {
  std::vector<double> out(outcome_count());
  std::iota(out.begin(), out.end(), 0.0);
  return out;
}

std::vector<ThetaAtom> ToyModel::prior_atoms(const PriorPerturbation& p) const {
  const auto masses = p.masses.empty() ? spec_.prior_masses : normalized_masses(p.masses, atom_count());
  std::vector<ThetaAtom> atoms;
  for (std::size_t i = 0; i < atom_count(); ++i) atoms.push_back({Theta{{static_cast<double>(i)}}, masses[i]});
  return atoms;
}

nlohmann::json ToyModel::config() const {
  return {{"preset", spec_.name},
          {"prior_masses", spec_.prior_masses},
          {"table_a", spec_.table_a},
          {"table_b", spec_.table_b}};
}

}  // namespace stepdad
