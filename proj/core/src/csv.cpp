#include "stepdad/csv.hpp"

#include <iomanip>

namespace stepdad {

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_history_csv(std::ostream& out, const Model& model, const History& history) {
  const auto fields = model.design_fields();
  out << "t";
  for (const auto& f : fields) out << ",raw_" << csv_cell(f.name);
  for (const auto& f : fields) out << ',' << csv_cell(f.name);
  out << ",y\n";
  out << std::setprecision(17);
  for (std::size_t t = 0; t < history.size(); ++t) {
    const auto& s = history[t];
    out << t + 1;
    for (double v : s.raw.values) out << ',' << v;
    for (double v : s.design.values) out << ',' << v;
    out << ',' << s.outcome.value << '\n';
  }
}

void write_trace_csv(std::ostream& out, const std::vector<double>& trace) {
  out << "step,objective\n" << std::setprecision(17);
  for (std::size_t i = 0; i < trace.size(); ++i) out << i << ',' << trace[i] << '\n';
}

}  // namespace stepdad
