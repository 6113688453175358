#include "stepdad/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json_fields.hpp"
#include "stepdad/errors.hpp"

namespace stepdad {

namespace {

using nlohmann::json;

class TomlParser {
 public:
  explicit TomlParser(const std::string& text) : s_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        ++i_;
        skip_ws();
        std::vector<std::string> path = parse_key_path();
        skip_ws();
        expect(']');
        end_of_line();
        table = &root;
        for (const auto& part : path) {
          json& next = (*table)[part];
          if (next.is_null()) next = json::object();
          if (!next.is_object()) fail("'" + part + "' is already a value, not a table");
          table = &next;
        }
        continue;
      }
      std::vector<std::string> path = parse_key_path();
      skip_ws();
      expect('=');
      skip_ws();
      json value = parse_value();
      end_of_line();
      json* target = table;
      for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        json& next = (*target)[path[k]];
        if (next.is_null()) next = json::object();
        if (!next.is_object()) fail("'" + path[k] + "' is already a value, not a table");
        target = &next;
      }
      if (target->contains(path.back())) fail("duplicate key '" + path.back() + "'");
      (*target)[path.back()] = std::move(value);
    }
    return root;
  }

  json parse_single_value() {
    skip_ws();
    json v = parse_value();
    skip_ws();
    if (!eof()) fail("trailing characters after value");
    return v;
  }

 private:
  const std::string& s_;
  std::size_t i_ = 0;

  bool eof() const { return i_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[i_]; }

  [[noreturn]] void fail(const std::string& what) const {
    std::size_t line = 1;
    for (std::size_t k = 0; k < i_ && k < s_.size(); ++k) line += s_[k] == '\n';
    throw ConfigError("config line " + std::to_string(line) + ": " + what);
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++i_;
  }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++i_;
  }

  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') ++i_;
    }
  }

  void skip_blank_lines() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\r' || peek() == '\n') {
        ++i_;
        continue;
      }
      break;
    }
  }

  // Whitespace, newlines and comments inside arrays.
  void skip_array_space() { skip_blank_lines(); }

  void end_of_line() {
    skip_ws();
    skip_comment();
    if (eof()) return;
    if (peek() == '\r') ++i_;
    if (peek() != '\n') fail("expected end of line");
    ++i_;
  }

  static bool bare_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> path;
    while (true) {
      skip_ws();
      if (peek() == '"') {
        path.push_back(parse_basic_string());
      } else if (peek() == '\'') {
        path.push_back(parse_literal_string());
      } else {
        const std::size_t start = i_;
        while (!eof() && bare_char(peek())) ++i_;
        if (i_ == start) fail("expected a key");
        path.push_back(s_.substr(start, i_ - start));
      }
      skip_ws();
      if (peek() != '.') break;
      ++i_;
    }
    return path;
  }

  std::string parse_basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = s_[i_++];
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated escape");
      char e = s_[i_++];
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'u': {
          if (i_ + 4 > s_.size()) fail("short \\u escape");
          const unsigned code = static_cast<unsigned>(std::stoul(s_.substr(i_, 4), nullptr, 16));
          i_ += 4;
          if (code < 0x80) {
            out += static_cast<char>(code);
          } else if (code < 0x800) {
            out += static_cast<char>(0xC0 | (code >> 6));
            out += static_cast<char>(0x80 | (code & 0x3F));
          } else {
            out += static_cast<char>(0xE0 | (code >> 12));
            out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (code & 0x3F));
          }
          break;
        }
        default: fail(std::string("unknown escape \\") + e);
      }
    }
    return out;
  }

  std::string parse_literal_string() {
    expect('\'');
    const std::size_t start = i_;
    while (!eof() && peek() != '\'' && peek() != '\n') ++i_;
    if (peek() != '\'') fail("unterminated string");
    std::string out = s_.substr(start, i_ - start);
    ++i_;
    return out;
  }

  json parse_array() {
    expect('[');
    json arr = json::array();
    while (true) {
      skip_array_space();
      if (peek() == ']') {
        ++i_;
        return arr;
      }
      arr.push_back(parse_value());
      skip_array_space();
      if (peek() == ',') {
        ++i_;
        continue;
      }
      if (peek() == ']') {
        ++i_;
        return arr;
      }
      fail("expected ',' or ']' in array");
    }
  }

  json parse_value() {
    const char c = peek();
    if (c == '"') return parse_basic_string();
    if (c == '\'') return parse_literal_string();
    if (c == '[') return parse_array();
    if (c == '{') fail("inline tables are not supported; use a [section]");
    const std::size_t start = i_;
    while (!eof() && (bare_char(peek()) || peek() == '.' || peek() == '+')) ++i_;
    std::string tok = s_.substr(start, i_ - start);
    if (tok.empty()) fail("expected a value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char ch : tok) {
      if (ch != '_') digits += ch;
    }
    const std::string body = (digits[0] == '+' || digits[0] == '-') ? digits.substr(1) : digits;
    if (body == "inf" || body == "nan") {
      const double v = body == "inf" ? INFINITY : NAN;
      return digits[0] == '-' ? -v : v;
    }
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    try {
      std::size_t pos = 0;
      if (is_float) {
        const double v = std::stod(digits, &pos);
        if (pos != digits.size()) fail("malformed number '" + tok + "'");
        return v;
      }
      if (digits[0] == '-') {
        const long long v = std::stoll(digits, &pos);
        if (pos != digits.size()) fail("malformed integer '" + tok + "'");
        return v;
      }
      const unsigned long long v = std::stoull(digits[0] == '+' ? digits.substr(1) : digits, &pos);
      if (pos != body.size()) fail("malformed integer '" + tok + "'");
      if (v <= static_cast<unsigned long long>(INT64_MAX)) return static_cast<std::int64_t>(v);
      return static_cast<std::uint64_t>(v);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      fail("malformed value '" + tok + "'");
    }
  }
};

bool bare_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string key_text(const std::string& k) { return bare_key(k) ? k : quote(k); }

std::string value_text(const json& v) {
  switch (v.type()) {
    case json::value_t::string: return quote(v.get<std::string>());
    case json::value_t::boolean: return v.get<bool>() ? "true" : "false";
    case json::value_t::number_integer: return std::to_string(v.get<std::int64_t>());
    case json::value_t::number_unsigned: return std::to_string(v.get<std::uint64_t>());
    case json::value_t::number_float: {
      const double d = v.get<double>();
      if (std::isnan(d)) return "nan";
      if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", d);
      std::string s = buf;
      if (s.find_first_of(".e") == std::string::npos) s += ".0";
      return s;
    }
    case json::value_t::array: {
      std::string out = "[";
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (v[k].is_object() || v[k].is_null()) throw ConfigError("to_toml: arrays may hold only scalars and arrays");
        out += (k ? ", " : "") + value_text(v[k]);
      }
      return out + "]";
    }
    default: throw ConfigError("to_toml: unsupported value " + v.dump());
  }
}

void write_table(std::ostringstream& out, const std::string& name, const json& table) {
  bool header_written = name.empty();
  for (const auto& [k, v] : table.items()) {
    if (v.is_object()) continue;
    if (!header_written) {
      out << "\n[" << name << "]\n";
      header_written = true;
    }
    out << key_text(k) << " = " << value_text(v) << '\n';
  }
  for (const auto& [k, v] : table.items()) {
    if (!v.is_object()) continue;
    const std::string sub = name.empty() ? key_text(k) : name + "." + key_text(k);
    if (v.empty()) {
      out << "\n[" << sub << "]\n";
    } else {
      write_table(out, sub, v);
    }
  }
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream in(path);
  std::string p;
  while (std::getline(in, p, '.')) {
    if (p.empty()) throw ConfigError("override path '" + path + "' has an empty component");
    parts.push_back(p);
  }
  if (parts.empty()) throw ConfigError("empty override path");
  return parts;
}

TrainConfig train_from_json(const json& j, TrainConfig c, const std::string& ctx) {
  detail::reject_unknown_keys(j,
                              {"batch", "contrasts", "steps", "lr", "beta1", "beta2", "epsilon", "lr_decay",
                               "decay_every", "grad_mode", "freeze_encoder", "checkpoint_every"},
                              ctx);
  c.batch = detail::read_field(j, "batch", c.batch, ctx);
  c.contrasts = detail::read_field(j, "contrasts", c.contrasts, ctx);
  c.steps = detail::read_field(j, "steps", c.steps, ctx);
  c.adam.learning_rate = detail::read_field(j, "lr", c.adam.learning_rate, ctx);
  c.adam.beta1 = detail::read_field(j, "beta1", c.adam.beta1, ctx);
  c.adam.beta2 = detail::read_field(j, "beta2", c.adam.beta2, ctx);
  c.adam.epsilon = detail::read_field(j, "epsilon", c.adam.epsilon, ctx);
  c.adam.decay_factor = detail::read_field(j, "lr_decay", c.adam.decay_factor, ctx);
  c.adam.decay_period = detail::read_field(j, "decay_every", c.adam.decay_period, ctx);
  if (j.contains("grad_mode")) {
    const auto m = detail::read_field(j, "grad_mode", std::string("default"), ctx);
    if (m == "default") {
      c.grad_mode.reset();
    } else {
      try {
        c.grad_mode = grad_mode_from_string(m);
      } catch (const std::exception& e) {
        throw ConfigError(ctx + ".grad_mode: " + e.what());
      }
    }
  }
  c.freeze_encoder = detail::read_field(j, "freeze_encoder", c.freeze_encoder, ctx);
  c.checkpoint_every = detail::read_field(j, "checkpoint_every", c.checkpoint_every, ctx);
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
  return c;
}

json block_or_empty(const json& doc, const char* key) {
  if (!doc.contains(key)) return json::object();
  const json& b = doc.at(key);
  if (!b.is_object()) throw ConfigError(std::string("config: '") + key + "' must be a table");
  return b;
}

}  // namespace

json parse_toml(const std::string& text) { return TomlParser(text).parse(); }

std::string to_toml(const json& doc) {
  if (!doc.is_object()) throw ConfigError("to_toml: document must be a table");
  std::ostringstream out;
  write_table(out, "", doc);
  std::string s = out.str();
  if (!s.empty() && s.front() == '\n') s.erase(0, 1);
  return s;
}

void apply_override(json& doc, const std::string& path, const std::string& value) {
  const auto parts = split_path(path);
  json* target = &doc;
  for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
    json& next = (*target)[parts[k]];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) throw ConfigError("override: '" + parts[k] + "' is not a table");
    target = &next;
  }
  json v;
  try {
    std::string copy = value;
    v = TomlParser(copy).parse_single_value();
  } catch (const ConfigError&) {
    v = value;
  }
  (*target)[parts.back()] = std::move(v);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' must look like key.path=value");
  apply_override(doc, assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::size_t default_horizon(const Model& model) {
  const std::string name = model.name();
  if (name == "location-finding" || name == "ces") return 10;
  if (name == "hyperbolic-discounting") return 20;
  if (name == "linear-gaussian") return 2;
  return 3;
}

EngineConfig EngineConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be a table");
  detail::reject_unknown_keys(doc, {"seed", "model", "policy", "train", "refine", "schedule", "eval", "io"},
                              "config");
  EngineConfig c;
  if (doc.contains("seed")) {
    const json& s = doc.at("seed");
    if (s.is_number_unsigned() || (s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
      c.seed = s.get<std::uint64_t>();
    } else if (s.is_string()) {
      try {
        std::size_t pos = 0;
        c.seed = std::stoull(s.get<std::string>(), &pos);
        if (pos != s.get<std::string>().size()) throw std::invalid_argument("seed");
      } catch (const std::exception&) {
        throw ConfigError("config.seed: '" + s.get<std::string>() + "' is not an unsigned integer");
      }
    } else {
      throw ConfigError("config.seed must be a non-negative integer");
    }
  }
  if (doc.contains("model")) {
    c.model = block_or_empty(doc, "model");
    if (!c.model.contains("name")) throw ConfigError("config.model: 'name' is required");
  }
  c.policy = block_or_empty(doc, "policy");
  c.train = block_or_empty(doc, "train");
  c.refine = block_or_empty(doc, "refine");
  c.schedule = block_or_empty(doc, "schedule");
  c.eval = block_or_empty(doc, "eval");
  c.io = block_or_empty(doc, "io");

  detail::reject_unknown_keys(c.schedule, {"T", "taus", "budgets", "posterior_samples", "prior_shift"}, "schedule");
  detail::reject_unknown_keys(c.eval, {"L", "N", "histories", "exact", "direct", "shifts"}, "eval");
  detail::reject_unknown_keys(c.io, {"checkpoint_dir", "report_dir"}, "io");

  // Every accessor validates its block.
  const auto model = c.make_model();
  c.policy_spec(*model);
  c.train_config(*model);
  c.refine_config(*model);
  c.refinement_schedule(*model);
  c.bound_options(*model);
  c.eval_histories();
  c.eval_exact();
  c.eval_direct();
  c.eval_shifts();
  c.posterior_samples();
  c.checkpoint_dir();
  c.report_dir();
  return c;
}

json EngineConfig::to_json() const {
  return {{"seed", seed}, {"model", model},       {"policy", policy}, {"train", train},
          {"refine", refine}, {"schedule", schedule}, {"eval", eval},     {"io", io}};
}

std::string EngineConfig::to_toml() const { return stepdad::to_toml(to_json()); }

std::string EngineConfig::model_name() const {
  return detail::read_field(model, "name", std::string("location-finding"), "model");
}

std::unique_ptr<Model> EngineConfig::make_model() const {
  json constants = model;
  constants.erase("name");
  return stepdad::make_model(model_name(), constants);
}

PolicySpec EngineConfig::policy_spec(const Model& m) const { return PolicySpec::from_json(policy, default_policy_spec(m)); }

TrainConfig EngineConfig::train_config(const Model& m) const {
  TrainConfig c = train_from_json(train, default_train_config(m), "train");
  c.seed = seed;
  c.checkpoint_dir = checkpoint_dir();
  return c;
}

TrainConfig EngineConfig::refine_config(const Model& m) const {
  TrainConfig base = default_refine_config(m);
  // Batch shape and gradient mode carry over from [train] unless [refine] sets them.
  const TrainConfig trained = train_config(m);
  base.batch = trained.batch;
  base.contrasts = trained.contrasts;
  base.grad_mode = trained.grad_mode;
  TrainConfig c = train_from_json(refine, base, "refine");
  c.seed = mix_seed(seed, 0x2ef1);
  return c;
}

std::size_t EngineConfig::horizon(const Model& m) const {
  const std::size_t T = detail::read_field(schedule, "T", default_horizon(m), "schedule");
  detail::require(T >= 1, "schedule.T must be >= 1");
  return T;
}

RefinementSchedule EngineConfig::refinement_schedule(const Model& m) const {
  RefinementSchedule s;
  s.T = horizon(m);
  const std::vector<std::size_t> fallback = s.T >= 2 ? std::vector<std::size_t>{s.T / 2} : std::vector<std::size_t>{};
  s.taus = detail::read_field(schedule, "taus", fallback, "schedule");
  const std::size_t budget = refine_config(m).steps;
  s.budgets = detail::read_field(schedule, "budgets", std::vector<std::size_t>(s.taus.size(), budget), "schedule");
  s.validate();
  return s;
}

StepDadConfig EngineConfig::stepdad_config(const Model& m) const {
  StepDadConfig c;
  c.schedule = refinement_schedule(m);
  c.refine = refine_config(m);
  c.posterior_samples = posterior_samples();
  c.inference_prior.shift = detail::read_field(schedule, "prior_shift", 0.0, "schedule");
  c.seed = seed;
  return c;
}

BoundOptions EngineConfig::bound_options(const Model& m) const {
  BoundOptions b;
  b.T = horizon(m);
  b.L = detail::read_field(eval, "L", b.L, "eval");
  b.N = detail::read_field(eval, "N", b.N, "eval");
  b.exact = eval_exact();
  b.seed = mix_seed(seed, 0xe7a1);
  detail::require(b.L >= 1, "eval.L must be >= 1");
  detail::require(b.N >= 1, "eval.N must be >= 1");
  return b;
}

std::size_t EngineConfig::eval_histories() const {
  const auto h = detail::read_field(eval, "histories", std::size_t{16}, "eval");
  detail::require(h >= 1, "eval.histories must be >= 1");
  return h;
}

std::size_t EngineConfig::posterior_samples() const {
  const auto n = detail::read_field(schedule, "posterior_samples", std::size_t{20000}, "schedule");
  detail::require(n >= 1, "schedule.posterior_samples must be >= 1");
  return n;
}

bool EngineConfig::eval_exact() const { return detail::read_field(eval, "exact", false, "eval"); }
bool EngineConfig::eval_direct() const { return detail::read_field(eval, "direct", false, "eval"); }

std::vector<double> EngineConfig::eval_shifts() const {
  return detail::read_field(eval, "shifts", std::vector<double>{0.0, 1.5, 3.0}, "eval");
}

std::filesystem::path EngineConfig::checkpoint_dir() const {
  return detail::read_field(io, "checkpoint_dir", std::string("checkpoints"), "io");
}

std::filesystem::path EngineConfig::report_dir() const {
  return detail::read_field(io, "report_dir", std::string("reports"), "io");
}

json parse_config_document(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
  }
  return parse_toml(text);
}

json read_config_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (path.extension() == ".json") {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": malformed JSON: " + e.what());
    }
  }
  return parse_config_document(text);
}

EngineConfig load_engine_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json doc = path.empty() ? json::object() : read_config_document(path);
  for (const auto& o : overrides) apply_override(doc, o);
  return EngineConfig::from_json(doc);
}

}  // namespace stepdad
