#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "stepdad/history.hpp"
#include "stepdad/model.hpp"

namespace stepdad {

/// t, raw design components, constrained design components (named after
/// the model's design fields), outcome.
void write_history_csv(std::ostream& out, const Model& model, const History& history);

/// step,objective
void write_trace_csv(std::ostream& out, const std::vector<double>& trace);

/// Quotes a CSV cell when it holds a comma, quote or newline.
std::string csv_cell(const std::string& s);

}  // namespace stepdad
