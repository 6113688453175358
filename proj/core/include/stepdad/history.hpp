#pragma once

#include <vector>

#include "stepdad/model.hpp"

namespace stepdad {

/// One experiment step. The raw design is kept alongside the constrained
/// one because policy encoders consume the raw representation.
struct HistoryStep {
  RawDesign raw;
  Design design;
  Outcome outcome;
  friend bool operator==(const HistoryStep&, const HistoryStep&) = default;
};

struct History {
  std::vector<HistoryStep> steps;

  std::size_t size() const { return steps.size(); }
  bool empty() const { return steps.empty(); }
  const HistoryStep& operator[](std::size_t i) const { return steps[i]; }
  void push_back(HistoryStep s) { steps.push_back(std::move(s)); }
  History prefix(std::size_t n) const { return {{steps.begin(), steps.begin() + static_cast<long>(n)}}; }

  friend bool operator==(const History&, const History&) = default;
};

/// Sum over steps of log p(y_t | theta, xi_t).
double history_log_likelihood(const Model& model, std::span<const double> theta, const History& history);

nlohmann::json history_to_json(const History& h);
History history_from_json(const Model& model, const nlohmann::json& j);

}  // namespace stepdad
