#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "stepdad/config.hpp"
#include "stepdad/csv.hpp"
#include "stepdad/enumerate.hpp"
#include "stepdad/errors.hpp"
#include "stepdad/eval.hpp"
#include "stepdad/log.hpp"
#include "stepdad/session.hpp"

namespace stepdad::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json config_document(const CommonOptions& c) {
  json doc = c.config.empty() ? json::object() : read_config_document(c.config);
  if (!c.model.empty()) {
    const bool same = doc.contains("model") && doc["model"].is_object() && doc["model"].value("name", "") == c.model;
    if (!same) doc["model"] = {{"name", c.model}};
  }
  if (c.T) doc["schedule"]["T"] = *c.T;
  if (c.seed) doc["seed"] = *c.seed;
  for (const auto& o : c.overrides) apply_override(doc, o);
  return doc;
}

EngineConfig load_config(const CommonOptions& c) { return EngineConfig::from_json(config_document(c)); }

void ensure_parent(const fs::path& p) {
  if (!p.has_parent_path()) return;
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + p.parent_path().string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& p) {
  ensure_parent(p);
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + p.string());
  return f;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(p.string() + ": malformed JSON: " + e.what());
  }
}

PolicyParams load_or_init(const EngineConfig& cfg, const Model& model, const fs::path& path) {
  if (!path.empty()) {
    PolicyParams p = load_policy(path);
    if (p.design_dim != model.design_dim()) {
      throw ConfigError("policy " + path.string() + " has design width " + std::to_string(p.design_dim) +
                        " but " + model.name() + " needs " + std::to_string(model.design_dim()));
    }
    return p;
  }
  Rng rng(cfg.seed);
  return PolicyParams::build(cfg.policy_spec(model), model.design_dim(), rng);
}

ProgressFn progress_logger(const std::string& what) {
  return [what](std::size_t step, std::size_t total, double objective) {
    const std::size_t every = std::max<std::size_t>(1, total / 20);
    if (step % every == 0 || step == total) {
      std::ostringstream m;
      m << what << " step " << step << "/" << total << " objective " << objective;
      log::info(m.str());
    }
  };
}

History read_history(const Model& model, const fs::path& p) {
  const json j = read_json(p);
  return history_from_json(model, j.is_object() && j.contains("history") ? j.at("history") : j);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Tensor read_designs(const Model& model, const fs::path& p) {
  const json j = read_json(p);
  const json& rows = j.is_object() ? j.at("designs") : j;
  Tensor t = Tensor::matrix(rows.size(), model.design_dim());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != model.design_dim()) throw ConfigError(p.string() + ": design row has the wrong width");
    for (std::size_t i = 0; i < model.design_dim(); ++i) t(r, i) = rows[r][i].get<double>();
  }
  return t;
}

DeltaConfig delta_config(const EngineConfig& cfg, const Model& model, std::size_t tau) {
  DeltaConfig d;
  d.tau = tau;
  d.T = cfg.horizon(model);
  d.refine = cfg.refine_config(model);
  d.posterior_samples = cfg.posterior_samples();
  d.histories = cfg.eval_histories();
  d.bounds = cfg.bound_options(model);
  d.seed = mix_seed(cfg.seed, 0xde17a);
  d.direct = cfg.eval_direct();
  return d;
}

std::size_t stepdad_tau(const EngineConfig& cfg, const Model& model, const std::optional<std::size_t>& tau) {
  if (tau) return *tau;
  const auto s = cfg.refinement_schedule(model);
  if (s.taus.empty()) throw ConfigError("step-dad evaluation needs --tau or a scheduled refinement step");
  return s.taus.front();
}

}  // namespace

int cmd_train(const CommonOptions& c, const TrainOptions& o, std::ostream& out) {
  const EngineConfig cfg = load_config(c);
  const auto model = cfg.make_model();
  const std::size_t T = cfg.horizon(*model);
  TrainConfig tc = cfg.train_config(*model);
  if (o.method == "static") {
    const StaticResult r = train_static(*model, T, tc);
    const fs::path path = o.out.empty() ? cfg.checkpoint_dir() / "static.json" : o.out;
    json designs = json::array();
    for (std::size_t t = 0; t < r.designs.rows(); ++t) {
      json row = json::array();
      for (std::size_t i = 0; i < r.designs.cols(); ++i) row.push_back(r.designs(t, i));
      designs.push_back(row);
    }
    open_out(path) << json{{"model", model->name()}, {"T", T}, {"designs", designs}}.dump(2) << '\n';
    auto loss = open_out(o.loss_csv.empty() ? cfg.report_dir() / "static_loss.csv" : o.loss_csv);
    write_trace_csv(loss, r.objective_trace);
    out << "static designs written to " << path.string() << '\n';
    return r.diverged ? kDivergence : kOk;
  }
  if (o.method != "dad") throw ConfigError("train --method must be dad or static");
  PolicyParams init = load_or_init(cfg, *model, {});
  const TrainResult r = train_dad(*model, std::move(init), T, tc, progress_logger("train"));
  const fs::path path = o.out.empty() ? cfg.checkpoint_dir() / "pi0.json" : o.out;
  ensure_parent(path);
  save_policy(path, r.policy,
              {{"model", model->name()}, {"T", T}, {"steps_done", r.steps_done}, {"config", cfg.to_json()}});
  auto loss = open_out(o.loss_csv.empty() ? cfg.report_dir() / "train_loss.csv" : o.loss_csv);
  write_trace_csv(loss, r.objective_trace);
  if (r.diverged) {
    std::cerr << "training diverged: " << r.diagnostic << "; last good policy saved to " << path.string() << '\n';
    return kDivergence;
  }
  out << "policy written to " << path.string() << " after " << r.steps_done << " steps\n";
  return kOk;
}

int cmd_refine(const CommonOptions& c, const RefineOptions& o, std::ostream& out) {
  const EngineConfig cfg = load_config(c);
  const auto model = cfg.make_model();
  if (o.policy.empty() || o.history.empty()) throw ConfigError("refine needs --policy and --history");
  const PolicyParams pi = load_or_init(cfg, *model, o.policy);
  const History h = read_history(*model, o.history);
  const std::size_t T = cfg.horizon(*model);
  Rng prng = Rng(cfg.seed).substream(0x1f00);
  auto post = std::make_shared<ParticlePosterior>(fit_posterior_is(*model, h, cfg.posterior_samples(), prng));
  const TrainResult r =
      refine_policy(*model, pi, ThetaSource::particles(*model, post), h, T, cfg.refine_config(*model),
                    progress_logger("refine"));
  const fs::path path = o.out.empty() ? cfg.checkpoint_dir() / "refined.json" : o.out;
  ensure_parent(path);
  save_policy(path, r.policy, {{"model", model->name()}, {"T", T}, {"tau", h.size()}, {"steps_done", r.steps_done}});
  if (r.diverged) {
    std::cerr << "refinement diverged: " << r.diagnostic << '\n';
    return kDivergence;
  }
  out << "refined policy written to " << path.string() << " (ESS " << post->effective_sample_size << ")\n";
  return kOk;
}

int cmd_run(const CommonOptions& c, const RunOptions& o, std::ostream& out) {
  json doc;
  fs::path policy_path = o.policy;
  double prior_shift = o.prior_shift;
  if (!o.from_manifest.empty()) {
    const json m = read_json(o.from_manifest);
    doc = m.at("config");
    policy_path = m.value("policy", std::string());
    prior_shift = m.value("prior_shift", 0.0);
  } else {
    doc = config_document(c);
  }
  EngineConfig cfg = EngineConfig::from_json(doc);
  auto model = cfg.make_model();
  if (!o.schedule.empty()) {
    const auto s = RefinementSchedule::parse(o.schedule, cfg.horizon(*model), cfg.refine_config(*model).steps);
    doc["schedule"]["taus"] = s.taus;
    doc["schedule"]["budgets"] = s.budgets;
    cfg = EngineConfig::from_json(doc);
  }
  const PolicyParams pi0 = load_or_init(cfg, *model, policy_path);
  SimulatedEnvironment env(*model, mix_seed(cfg.seed, 0xe0), PriorPerturbation{prior_shift, {}});
  const RunResult r = run_stepdad(*model, pi0, cfg.stepdad_config(*model), env, progress_logger("refine"));

  const fs::path hist_path = o.out.empty() ? cfg.report_dir() / "history.json" : o.out;
  open_out(hist_path) << json{{"model", model->name()}, {"history", history_to_json(r.history)}}.dump(2) << '\n';

  json timings = json::array();
  for (const auto& t : r.timings) {
    timings.push_back({{"start", t.start},
                       {"end", t.end},
                       {"design_seconds", t.design_seconds},
                       {"inference_seconds", t.inference_seconds},
                       {"refinement_seconds", t.refinement_seconds},
                       {"ess", t.ess},
                       {"refine_steps", t.refine_steps},
                       {"error", t.error}});
  }
  const fs::path manifest = o.manifest.empty() ? cfg.report_dir() / "manifest.json" : o.manifest;
  json m = {{"config", cfg.to_json()},
            {"policy", policy_path.empty() ? std::string() : fs::absolute(policy_path).string()},
            {"policy_fingerprint", std::to_string(pi0.fingerprint())},
            {"prior_shift", prior_shift},
            {"theta_star", env.theta().values},
            {"history_file", fs::absolute(hist_path).string()},
            {"timings", timings},
            {"total_seconds", r.total_seconds}};
  open_out(manifest) << m.dump(2) << '\n';
  out << "history written to " << hist_path.string() << " (" << r.history.size() << " steps), manifest "
      << manifest.string() << '\n';
  for (const auto& t : r.timings) {
    if (!t.error.empty()) out << "stage " << t.start << ".." << t.end << " kept previous policy: " << t.error << '\n';
  }
  return kOk;
}

int cmd_evaluate(const CommonOptions& c, const EvaluateOptions& o, std::ostream& out) {
  const EngineConfig cfg = load_config(c);
  const auto model = cfg.make_model();
  const BoundOptions bounds = cfg.bound_options(*model);
  std::string methods = o.methods;
  if (methods.empty()) {
    methods = o.policy.empty() ? "random" : "dad,random";
    if (!o.designs.empty()) methods += ",static";
  }
  const ThetaSource prior = ThetaSource::prior(*model);
  EvalReport report;
  std::optional<PolicyParams> pi0;
  if (!o.policy.empty()) pi0 = load_or_init(cfg, *model, o.policy);
  for (const auto& m : split_list(methods)) {
    if (m == "random") {
      report.methods.push_back(make_eval_row(
          "random", estimate_total_eig(*model, random_policy(*model, mix_seed(cfg.seed, 0x7a)), prior, bounds)));
    } else if (m == "static") {
      if (o.designs.empty()) throw ConfigError("method 'static' needs --designs");
      report.methods.push_back(make_eval_row(
          "static", estimate_total_eig(*model, DesignPolicy::fixed(read_designs(*model, o.designs)), prior, bounds)));
    } else if (m == "dad" || m == "step-dad") {
      if (!pi0) pi0 = load_or_init(cfg, *model, {});
      const PairedBounds base = estimate_total_eig(*model, DesignPolicy::network(*pi0), prior, bounds);
      if (m == "dad") {
        report.methods.push_back(make_eval_row("dad", base));
      } else {
        const std::size_t tau = stepdad_tau(cfg, *model, o.tau);
        const DeltaEstimate d =
            estimate_delta_eig(*model, *pi0, delta_config(cfg, *model, tau), progress_logger("refine"));
        report.deltas.push_back({tau, d.mean, d.se, d.rows.size()});
        report.methods.push_back(stepdad_total_row(base, d, "prior"));
      }
    } else {
      throw ConfigError("unknown method '" + m + "' (dad, step-dad, static, random)");
    }
  }
  const fs::path path = o.out.empty() ? cfg.report_dir() / "eval.csv" : o.out;
  auto f = open_out(path);
  report.write_csv(f);
  report.write_table(out);
  return kOk;
}

int cmd_sweep(const CommonOptions& c, const SweepOptions& o, std::ostream& out) {
  const EngineConfig cfg = load_config(c);
  const auto model = cfg.make_model();
  RobustnessConfig rc;
  for (double s : cfg.eval_shifts()) rc.priors.push_back({s, {}});
  rc.bounds = cfg.bound_options(*model);
  std::optional<PolicyParams> pi0;
  if (!o.policy.empty() || o.stepdad) pi0 = load_or_init(cfg, *model, o.policy);
  const std::string methods = o.methods.empty() ? (pi0 ? "dad,random" : "random") : o.methods;
  std::vector<std::pair<std::string, DesignPolicy>> policies;
  for (const auto& m : split_list(methods)) {
    if (m == "random") {
      policies.emplace_back("random", random_policy(*model, mix_seed(cfg.seed, 0x7a)));
    } else if (m == "dad") {
      if (!pi0) pi0 = load_or_init(cfg, *model, {});
      policies.emplace_back("dad", DesignPolicy::network(*pi0));
    } else {
      throw ConfigError("unknown sweep method '" + m + "' (dad, random; add --stepdad for step-dad)");
    }
  }
  if (o.stepdad) {
    rc.include_stepdad = true;
    rc.delta = delta_config(cfg, *model, stepdad_tau(cfg, *model, o.tau));
  }
  EvalReport report;
  report.robustness = robustness_sweep(*model, policies, rc, pi0 ? &*pi0 : nullptr, progress_logger("refine"));
  const fs::path path = o.out.empty() ? cfg.report_dir() / "robustness.csv" : o.out;
  auto f = open_out(path);
  f << std::setprecision(17) << "shift,source,method,lower,lower_se,upper,upper_se\n";
  for (const auto& r : report.robustness) {
    f << r.shift << ',' << csv_cell(r.source) << ',' << r.method << ',' << r.lower << ',' << r.lower_se << ','
      << r.upper << ',' << r.upper_se << '\n';
  }
  report.write_table(out);
  return kOk;
}

int cmd_oracle(const CommonOptions& c, const OracleOptions& o, std::ostream& out) {
  const EngineConfig cfg = load_config(c);
  const auto model = cfg.make_model();
  if (model->prior_atoms().empty() || model->discrete_outcomes().empty()) {
    throw ConfigError("oracle needs a model with finite prior support and outcomes (toy presets)");
  }
  const std::size_t T = cfg.horizon(*model);
  const DesignPolicy designs = random_policy(*model, mix_seed(cfg.seed, 0x7a));
  const Designer designer = designer_for(designs);
  const double eig = exact_eig(toy_enumerate(*model, designer, T));
  out << std::fixed << std::setprecision(6);
  out << "exact EIG over " << T << " step(s) (" << model->name() << ", random designs): " << eig << " nats\n";
  if (o.tau) {
    const DecompositionResult d = decomposition_check(*model, designer, T, *o.tau);
    out << "I(1.." << *o.tau << ") = " << d.prefix << ", E[I(" << *o.tau + 1 << ".." << T
        << " | h)] = " << d.expected_remaining << ", residual = " << std::scientific << d.residual << '\n';
  }
  return kOk;
}

int cmd_serve(const CommonOptions& c, const ServeOptions& o, std::ostream& out) {
  const EngineConfig cfg = load_config(c);
  std::shared_ptr<const PolicyParams> base;
  if (!o.policy.empty()) {
    const auto model = cfg.make_model();
    base = std::make_shared<PolicyParams>(load_or_init(cfg, *model, o.policy));
  }
  SessionService service(cfg, base);
  HttpServer server(service);
  const int port = server.bind(o.host, o.port);
  out << "serving session API on http://" << o.host << ':' << port << std::endl;
  server.listen();
  return kOk;
}

int cmd_live(const CommonOptions& c, const LiveOptions& o, std::istream& in, std::ostream& out) {
  const EngineConfig cfg = load_config(c);
  std::shared_ptr<const PolicyParams> base;
  if (!o.policy.empty()) {
    const auto model = cfg.make_model();
    base = std::make_shared<PolicyParams>(load_or_init(cfg, *model, o.policy));
  }
  SessionService service(cfg, base);
  auto session = service.create(json::object());
  out << std::setprecision(6);
  while (session->status() != SessionStatus::kComplete) {
    const json status = session->status_json();
    if (status.at("refine_due").get<bool>()) {
      out << "refining policy at step " << status.at("t") << " ..." << std::endl;
      const json r = session->refine({{"wait", true}});
      if (!r.value("error", "").empty()) out << "refinement failed, keeping previous policy: " << r["error"] << '\n';
      continue;
    }
    const json d = session->design();
    out << "step " << d.at("t") << " of " << d.at("T") << ":";
    for (const auto& f : d.at("fields")) {
      out << "  " << f.at("name").get<std::string>() << " = " << f.at("value").get<double>();
      const std::string unit = f.at("unit").get<std::string>();
      if (!unit.empty()) out << ' ' << unit;
    }
    out << "\noutcome (" << d.at("outcome_support").get<std::string>() << "): " << std::flush;
    std::string line;
    if (!std::getline(in, line)) {
      out << "\ninput closed; stopping early\n";
      break;
    }
    double y = 0.0;
    try {
      std::size_t pos = 0;
      y = std::stod(line, &pos);
      if (line.find_first_not_of(" \t\r", pos) != std::string::npos) throw std::invalid_argument(line);
    } catch (const std::exception&) {
      out << "not a number, try again\n";
      continue;
    }
    try {
      session->submit_outcome({{"y", y}});
    } catch (const ApiError& e) {
      out << e.what() << ", try again\n";
    }
  }
  const json h = session->history_json();
  if (!o.out.empty()) open_out(o.out) << h.dump(2) << '\n';
  out << "history: " << h.at("history").size() << " steps\n";
  return kOk;
}

}  // namespace stepdad::cli
