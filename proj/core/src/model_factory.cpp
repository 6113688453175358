#include "json_fields.hpp"
#include "stepdad/errors.hpp"
#include "stepdad/models.hpp"

namespace stepdad {

namespace {

using detail::read_field;
using detail::reject_unknown_keys;

std::unique_ptr<Model> make_location_finding(const nlohmann::json& c) {
  const std::string ctx = "model.location-finding";
  reject_unknown_keys(c, {"sources", "dim", "alpha", "max_signal", "base_signal", "noise_sd"}, ctx);
  LocationFindingSpec s;
  s.sources = read_field(c, "sources", s.sources, ctx);
  s.dim = read_field(c, "dim", s.dim, ctx);
  s.alpha = read_field(c, "alpha", s.alpha, ctx);
  s.max_signal = read_field(c, "max_signal", s.max_signal, ctx);
  s.base_signal = read_field(c, "base_signal", s.base_signal, ctx);
  s.noise_sd = read_field(c, "noise_sd", s.noise_sd, ctx);
  return std::make_unique<LocationFinding>(s);
}

std::unique_ptr<Model> make_htd(const nlohmann::json& c) {
  const std::string ctx = "model.hyperbolic-discounting";
  reject_unknown_keys(c, {"log_k_mean", "log_k_sd", "alpha_scale", "lapse", "max_log_delay"}, ctx);
  HyperbolicDiscountingSpec s;
  s.log_k_mean = read_field(c, "log_k_mean", s.log_k_mean, ctx);
  s.log_k_sd = read_field(c, "log_k_sd", s.log_k_sd, ctx);
  s.alpha_scale = read_field(c, "alpha_scale", s.alpha_scale, ctx);
  s.lapse = read_field(c, "lapse", s.lapse, ctx);
  s.max_log_delay = read_field(c, "max_log_delay", s.max_log_delay, ctx);
  return std::make_unique<HyperbolicDiscounting>(s);
}

std::unique_ptr<Model> make_ces(const nlohmann::json& c) {
  const std::string ctx = "model.ces";
  reject_unknown_keys(c, {"tau", "epsilon", "rho_a", "rho_b", "alpha_concentration", "log_u_mean", "log_u_sd"}, ctx);
  CesSpec s;
  s.tau = read_field(c, "tau", s.tau, ctx);
  s.epsilon = read_field(c, "epsilon", s.epsilon, ctx);
  s.rho_a = read_field(c, "rho_a", s.rho_a, ctx);
  s.rho_b = read_field(c, "rho_b", s.rho_b, ctx);
  s.alpha_concentration = read_field(c, "alpha_concentration", s.alpha_concentration, ctx);
  s.log_u_mean = read_field(c, "log_u_mean", s.log_u_mean, ctx);
  s.log_u_sd = read_field(c, "log_u_sd", s.log_u_sd, ctx);
  return std::make_unique<Ces>(s);
}

std::unique_ptr<Model> make_toy(const std::string& name, const nlohmann::json& c) {
  const std::string ctx = "model." + name;
  reject_unknown_keys(c, {"preset", "prior_masses", "table_a", "table_b"}, ctx);
  ToySpec s = toy_preset(read_field(c, "preset", name, ctx));
  s.prior_masses = read_field(c, "prior_masses", s.prior_masses, ctx);
  s.table_a = read_field(c, "table_a", s.table_a, ctx);
  s.table_b = read_field(c, "table_b", s.table_b, ctx);
  return std::make_unique<ToyModel>(s);
}

std::unique_ptr<Model> make_linear_gaussian(const nlohmann::json& c) {
  const std::string ctx = "model.linear-gaussian";
  reject_unknown_keys(c, {"prior_mean", "prior_sd", "noise_sd"}, ctx);
  LinearGaussianSpec s;
  s.prior_mean = read_field(c, "prior_mean", s.prior_mean, ctx);
  s.prior_sd = read_field(c, "prior_sd", s.prior_sd, ctx);
  s.noise_sd = read_field(c, "noise_sd", s.noise_sd, ctx);
  return std::make_unique<LinearGaussian>(s);
}

}  // namespace

std::vector<std::string> model_names() {
  return {"location-finding", "hyperbolic-discounting", "ces", "toy-binary", "toy-design", "toy-null", "linear-gaussian"};
}

std::unique_ptr<Model> make_model(const std::string& name, const nlohmann::json& config) {
  if (name == "location-finding") return make_location_finding(config);
  if (name == "hyperbolic-discounting" || name == "htd") return make_htd(config);
  if (name == "ces") return make_ces(config);
  if (name == "toy" || name == "toy-binary" || name == "toy-design" || name == "toy-null") return make_toy(name, config);
  if (name == "linear-gaussian") return make_linear_gaussian(config);
  std::string list;
  for (const auto& n : model_names()) list += (list.empty() ? "" : ", ") + n;
  throw ConfigError("unknown model '" + name + "' (known: " + list + ")");
}

}  // namespace stepdad
