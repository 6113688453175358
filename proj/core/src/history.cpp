#include "stepdad/history.hpp"

#include "stepdad/errors.hpp"

namespace stepdad {

double history_log_likelihood(const Model& model, std::span<const double> theta, const History& history) {
  double s = 0.0;
  for (const auto& step : history.steps) s += model.log_likelihood(theta, step.design.values, step.outcome.value, {}, nullptr);
  return s;
}

nlohmann::json history_to_json(const History& h) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : h.steps) {
    arr.push_back({{"raw_design", s.raw.values},
                   {"design", s.design.values},
                   {"outcome", s.outcome.value},
                   {"kind", std::string(to_string(s.outcome.kind))}});
  }
  return arr;
}

History history_from_json(const Model& model, const nlohmann::json& j) {
  if (!j.is_array()) throw IoError("history: expected a JSON array of steps");
  History h;
  for (const auto& s : j) {
    HistoryStep step;
    try {
      step.raw.values = s.at("raw_design").get<std::vector<double>>();
      step.outcome.value = s.at("outcome").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("history: malformed step: ") + e.what());
    }
    if (step.raw.values.size() != model.design_dim()) throw DimensionError("history: design width mismatch");
    step.design = constrain_design(model, step.raw);
    step.outcome.kind = model.outcome_kind();
    model.validate_outcome(step.outcome.value);
    h.push_back(std::move(step));
  }
  return h;
}

}  // namespace stepdad
