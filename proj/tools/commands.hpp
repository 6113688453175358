#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace stepdad::cli {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kDivergence = 3, kIo = 4 };

struct CommonOptions {
  std::filesystem::path config;
  std::vector<std::string> overrides;
  std::string model;
  std::optional<std::size_t> T;
  std::optional<std::uint64_t> seed;
};

struct TrainOptions {
  std::string method = "dad";  // dad | static
  std::filesystem::path out;
  std::filesystem::path loss_csv;
};

struct RefineOptions {
  std::filesystem::path policy;
  std::filesystem::path history;
  std::filesystem::path out;
};

struct RunOptions {
  std::filesystem::path policy;
  std::string schedule;
  std::filesystem::path out;
  std::filesystem::path manifest;
  std::filesystem::path from_manifest;
  double prior_shift = 0.0;
};

struct EvaluateOptions {
  std::filesystem::path policy;
  std::filesystem::path designs;
  std::string methods;
  std::optional<std::size_t> tau;
  std::filesystem::path out;
};

struct SweepOptions {
  std::filesystem::path policy;
  std::string methods;
  bool stepdad = false;
  std::optional<std::size_t> tau;
  std::filesystem::path out;
};

struct OracleOptions {
  std::optional<std::size_t> tau;
};

struct ServeOptions {
  std::filesystem::path policy;
  std::string host = "127.0.0.1";
  int port = 8080;
};

struct LiveOptions {
  std::filesystem::path policy;
  std::filesystem::path out;
};

int cmd_train(const CommonOptions& c, const TrainOptions& o, std::ostream& out);
int cmd_refine(const CommonOptions& c, const RefineOptions& o, std::ostream& out);
int cmd_run(const CommonOptions& c, const RunOptions& o, std::ostream& out);
int cmd_evaluate(const CommonOptions& c, const EvaluateOptions& o, std::ostream& out);
int cmd_sweep(const CommonOptions& c, const SweepOptions& o, std::ostream& out);
int cmd_oracle(const CommonOptions& c, const OracleOptions& o, std::ostream& out);
int cmd_serve(const CommonOptions& c, const ServeOptions& o, std::ostream& out);
int cmd_live(const CommonOptions& c, const LiveOptions& o, std::istream& in, std::ostream& out);

}  // namespace stepdad::cli
