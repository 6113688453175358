#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "stepdad/eval.hpp"
#include "stepdad/orchestrate.hpp"

namespace stepdad {

/// Parses the TOML subset used by engine configs: `[section]` headers,
/// `key = value` lines, `#` comments, strings, integers, floats, booleans
/// and (possibly multi-line) arrays. Returns the equivalent JSON document.
nlohmann::json parse_toml(const std::string& text);

/// Inverse of parse_toml for documents whose values are scalars, arrays of
/// scalars, or one level of tables.
std::string to_toml(const nlohmann::json& doc);

/// Sets `path` ("train.steps") to `value`, parsed as a TOML value when
/// possible and kept as a bare string otherwise.
void apply_override(nlohmann::json& doc, const std::string& path, const std::string& value);
/// "train.steps=200" form.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Engine configuration: one table per block, validated against the keys
/// each block allows. Blocks store only what the user set; the typed
/// accessors merge with per-model defaults.
///
///   seed = 0
///   [model]    name + model constants
///   [policy]   architecture, encoder_hidden, representation, ...
///   [train]    batch, contrasts, steps, lr, beta1, beta2, epsilon,
///              lr_decay, decay_every, grad_mode, freeze_encoder,
///              checkpoint_every
///   [refine]   same keys as [train]; unset keys inherit from [train]
///   [schedule] T, taus, budgets, posterior_samples, prior_shift
///   [eval]     L, N, histories, exact, direct, shifts, posterior_samples
///   [io]       checkpoint_dir, report_dir
struct EngineConfig {
  std::uint64_t seed = 0;
  nlohmann::json model = {{"name", "location-finding"}};
  nlohmann::json policy = nlohmann::json::object();
  nlohmann::json train = nlohmann::json::object();
  nlohmann::json refine = nlohmann::json::object();
  nlohmann::json schedule = nlohmann::json::object();
  nlohmann::json eval = nlohmann::json::object();
  nlohmann::json io = nlohmann::json::object();

  static EngineConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  std::string to_toml() const;

  std::string model_name() const;
  std::unique_ptr<Model> make_model() const;
  PolicySpec policy_spec(const Model& model) const;
  TrainConfig train_config(const Model& model) const;
  TrainConfig refine_config(const Model& model) const;
  std::size_t horizon(const Model& model) const;
  RefinementSchedule refinement_schedule(const Model& model) const;
  StepDadConfig stepdad_config(const Model& model) const;
  BoundOptions bound_options(const Model& model) const;
  std::size_t eval_histories() const;
  std::size_t posterior_samples() const;
  bool eval_exact() const;
  bool eval_direct() const;
  std::vector<double> eval_shifts() const;
  std::filesystem::path checkpoint_dir() const;
  std::filesystem::path report_dir() const;
};

/// Default experiment horizon per model.
std::size_t default_horizon(const Model& model);

/// Reads TOML, or JSON when the file ends in `.json` or starts with '{'.
nlohmann::json read_config_document(const std::filesystem::path& path);
nlohmann::json parse_config_document(const std::string& text);
EngineConfig load_engine_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

}  // namespace stepdad
