#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "stepdad/errors.hpp"
#include "stepdad/log.hpp"

namespace cli = stepdad::cli;

namespace {

void add_common(CLI::App* app, cli::CommonOptions& c) {
  app->add_option("-c,--config", c.config, "Engine config (TOML or JSON)");
  app->add_option("--set", c.overrides, "Override a config key, e.g. --set train.steps=200")->take_all();
  app->add_option("--model", c.model, "Model name; replaces the config's model block when different");
  app->add_option("--T", c.T, "Experiment horizon (schedule.T)");
  app->add_option("--seed", c.seed, "Master seed");
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const stepdad::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kConfig;
  } catch (const stepdad::DimensionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kConfig;
  } catch (const stepdad::SupportError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kConfig;
  } catch (const stepdad::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return cli::kDivergence;
  } catch (const stepdad::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return cli::kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stepdad: policy-based adaptive experimental design with test-time refinement"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "debug, info, warn, error or off")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

  cli::CommonOptions common;

  cli::TrainOptions train;
  auto* c_train = app.add_subcommand("train", "Train the offline policy (or static designs)");
  add_common(c_train, common);
  c_train->add_option("--method", train.method, "dad or static")->check(CLI::IsMember({"dad", "static"}));
  c_train->add_option("-o,--out", train.out, "Checkpoint path");
  c_train->add_option("--loss", train.loss_csv, "Loss trace CSV path");

  cli::RefineOptions refine;
  auto* c_refine = app.add_subcommand("refine", "Fine-tune a policy on the posterior given a history");
  add_common(c_refine, common);
  c_refine->add_option("--policy", refine.policy, "Policy checkpoint")->required();
  c_refine->add_option("--history", refine.history, "History JSON")->required();
  c_refine->add_option("-o,--out", refine.out, "Refined checkpoint path");

  cli::RunOptions run;
  auto* c_run = app.add_subcommand("run", "Simulated deployment with scheduled refinements");
  add_common(c_run, common);
  c_run->add_option("--policy", run.policy, "Pretrained policy checkpoint (fresh network when omitted)");
  c_run->add_option("--schedule", run.schedule, "Refinement steps, e.g. 0,3,T");
  c_run->add_option("-o,--out", run.out, "History JSON path");
  c_run->add_option("--manifest", run.manifest, "Manifest JSON path");
  c_run->add_option("--from-manifest", run.from_manifest, "Re-execute a previous run from its manifest");
  c_run->add_option("--prior-shift", run.prior_shift, "Shift of the data-generating prior");

  cli::EvaluateOptions eval;
  auto* c_eval = app.add_subcommand("evaluate", "Total EIG bounds per method");
  add_common(c_eval, common);
  c_eval->add_option("--policy", eval.policy, "Policy checkpoint");
  c_eval->add_option("--designs", eval.designs, "Static design JSON");
  c_eval->add_option("--methods", eval.methods, "Comma list of dad, step-dad, static, random");
  c_eval->add_option("--tau", eval.tau, "Refinement step for step-dad");
  c_eval->add_option("-o,--out", eval.out, "Report CSV path");

  cli::SweepOptions sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Robustness to a shifted test-time prior");
  add_common(c_sweep, common);
  c_sweep->add_option("--policy", sweep.policy, "Policy checkpoint");
  c_sweep->add_option("--methods", sweep.methods, "Comma list of dad, random");
  c_sweep->add_flag("--stepdad", sweep.stepdad, "Include step-dad rows");
  c_sweep->add_option("--tau", sweep.tau, "Refinement step for step-dad");
  c_sweep->add_option("-o,--out", sweep.out, "Robustness CSV path");

  cli::OracleOptions oracle;
  auto* c_oracle = app.add_subcommand("oracle", "Exact EIG by enumeration on toy models");
  add_common(c_oracle, common);
  c_oracle->add_option("--tau", oracle.tau, "Also print the chain-rule decomposition at tau");

  cli::ServeOptions serve;
  auto* c_serve = app.add_subcommand("serve", "HTTP session API");
  add_common(c_serve, common);
  c_serve->add_option("--policy", serve.policy, "Pretrained policy checkpoint");
  c_serve->add_option("--host", serve.host, "Bind address");
  c_serve->add_option("--port", serve.port, "Port (0 picks a free one)");

  cli::LiveOptions live;
  auto* c_live = app.add_subcommand("live", "Interactive terminal experiment");
  add_common(c_live, common);
  c_live->add_option("--policy", live.policy, "Pretrained policy checkpoint");
  c_live->add_option("-o,--out", live.out, "History JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kConfig;
  }

  using stepdad::log::Level;
  stepdad::log::set_level(log_level == "debug"  ? Level::kDebug
                          : log_level == "info" ? Level::kInfo
                          : log_level == "warn" ? Level::kWarn
                          : log_level == "error" ? Level::kError
                                                 : Level::kOff);

  return guarded([&] {
    if (*c_train) return cli::cmd_train(common, train, std::cout);
    if (*c_refine) return cli::cmd_refine(common, refine, std::cout);
    if (*c_run) return cli::cmd_run(common, run, std::cout);
    if (*c_eval) return cli::cmd_evaluate(common, eval, std::cout);
    if (*c_sweep) return cli::cmd_sweep(common, sweep, std::cout);
    if (*c_oracle) return cli::cmd_oracle(common, oracle, std::cout);
    if (*c_serve) return cli::cmd_serve(common, serve, std::cout);
    return cli::cmd_live(common, live, std::cin, std::cout);
  });
}
