#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

#include "stepdad/config.hpp"

namespace stepdad {

enum class SessionStatus { kAwaitingOutcome, kRefining, kComplete };

std::string_view to_string(SessionStatus s);

/// HTTP-shaped error raised by session operations.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, const std::string& message) : std::runtime_error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct SessionOptions {
  std::uint64_t seed = 0;
  RefinementSchedule schedule;
  TrainConfig refine;
  std::size_t posterior_samples = 20000;
};

/// One live experiment: designs from the current stage policy, outcomes
/// from a human, refinement on request. Mutations are serialized by the
/// session's mutex; a running refinement makes other mutations fail with 409.
class LiveSession {
 public:
  LiveSession(std::string id, std::shared_ptr<const Model> model, std::shared_ptr<const PolicyParams> base,
              SessionOptions options);
  ~LiveSession();
  LiveSession(const LiveSession&) = delete;
  LiveSession& operator=(const LiveSession&) = delete;

  const std::string& id() const { return id_; }
  SessionStatus status() const;

  nlohmann::json status_json() const;
  /// Proposed design for the next step. 409 when the session is complete
  /// or refining.
  nlohmann::json design();
  /// Appends (pending design, y). 422 with the support description when y
  /// is outside the model's support. A repeated idempotency key returns the
  /// first response without appending again.
  nlohmann::json submit_outcome(const nlohmann::json& body, const std::string& idempotency_key = {});
  /// Fits the posterior on the current history and fine-tunes the policy.
  /// With `wait` the call returns after the budget completes; otherwise the
  /// work runs on a background thread and the status endpoint reports
  /// progress. 409 while refining or complete.
  nlohmann::json refine(const nlohmann::json& body, const std::string& idempotency_key = {});
  nlohmann::json posterior();
  nlohmann::json history_json() const;
  std::string history_csv() const;
  /// Blocks until a background refinement (if any) has finished.
  void join();

  const PolicyParams& current_policy() const { return *policy_; }
  History history() const;

 private:
  void run_refinement(std::size_t budget);
  nlohmann::json design_json(const RawDesign& raw) const;

  std::string id_;
  std::shared_ptr<const Model> model_;
  std::shared_ptr<const PolicyParams> policy_;
  SessionOptions options_;

  mutable std::mutex mu_;
  History history_;
  SessionStatus status_ = SessionStatus::kAwaitingOutcome;
  std::size_t stage_ = 0;
  std::optional<RawDesign> pending_;
  std::map<std::string, nlohmann::json> replies_;
  std::shared_ptr<const ParticlePosterior> posterior_;
  std::size_t refined_at_ = static_cast<std::size_t>(-1);
  std::string last_error_;
  std::atomic<std::size_t> refine_done_{0};
  std::atomic<std::size_t> refine_total_{0};
  std::atomic<double> refine_objective_{0.0};
  std::thread worker_;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
  std::string content_type = "application/json";
  std::string text;  // non-JSON payloads (CSV)
};

/// Session registry plus request router. The HTTP server forwards to
/// `handle`, which tests can also call directly.
class SessionService {
 public:
  /// `base` is the read-only pretrained policy shared by every session;
  /// when null each session starts from a freshly initialized network.
  SessionService(EngineConfig config, std::shared_ptr<const PolicyParams> base = nullptr);
  ~SessionService();

  ApiResponse handle(const std::string& method, const std::string& path, const std::string& body,
                     const std::string& idempotency_key = {}, const std::string& query = {});

  std::shared_ptr<LiveSession> find(const std::string& id) const;
  std::shared_ptr<LiveSession> create(const nlohmann::json& body, const std::string& idempotency_key = {});

 private:
  EngineConfig config_;
  std::shared_ptr<const Model> model_;
  std::shared_ptr<const PolicyParams> base_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions_;
  std::map<std::string, std::string> created_by_key_;
  std::uint64_t next_id_ = 1;
};

/// Blocking HTTP server on host:port. Returns when stop_server() is called
/// from another thread or the listener fails.
class HttpServer {
 public:
  explicit HttpServer(SessionService& service);
  ~HttpServer();
  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace stepdad
