#include "stepdad/session.hpp"

#include <sstream>

#include "stepdad/csv.hpp"
#include "stepdad/errors.hpp"
#include "stepdad/log.hpp"

namespace stepdad {

using nlohmann::json;

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::kAwaitingOutcome: return "awaiting-outcome";
    case SessionStatus::kRefining: return "refining";
    case SessionStatus::kComplete: return "complete";
  }
  return "?";
}

LiveSession::LiveSession(std::string id, std::shared_ptr<const Model> model, std::shared_ptr<const PolicyParams> base,
                         SessionOptions options)
    : id_(std::move(id)), model_(std::move(model)), policy_(std::move(base)), options_(std::move(options)) {
  options_.schedule.validate();
}

LiveSession::~LiveSession() { join(); }

void LiveSession::join() {
  if (worker_.joinable()) worker_.join();
}

SessionStatus LiveSession::status() const {
  std::lock_guard lock(mu_);
  return status_;
}

History LiveSession::history() const {
  std::lock_guard lock(mu_);
  return history_;
}

json LiveSession::status_json() const {
  std::lock_guard lock(mu_);
  const std::size_t t = history_.size();
  bool due = false;
  for (auto tau : options_.schedule.taus) due = due || (tau == t && refined_at_ != t);
  return {{"session_id", id_},
          {"model", model_->name()},
          {"status", std::string(to_string(status_))},
          {"t", t},
          {"T", options_.schedule.T},
          {"stage", stage_},
          {"schedule", options_.schedule.to_json()},
          {"refine_due", due && status_ == SessionStatus::kAwaitingOutcome},
          {"refinement",
           {{"steps_done", refine_done_.load()},
            {"total", refine_total_.load()},
            {"objective", refine_objective_.load()}}},
          {"outcome_kind", std::string(to_string(model_->outcome_kind()))},
          {"outcome_support", model_->outcome_support()},
          {"last_error", last_error_}};
}

json LiveSession::design_json(const RawDesign& raw) const {
  const Design d = constrain_design(*model_, raw);
  const auto fields = model_->design_fields();
  json labeled = json::array();
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    labeled.push_back({{"name", fields[i].name}, {"unit", fields[i].unit}, {"value", d.values[i]}});
  }
  return {{"session_id", id_},        {"t", history_.size() + 1}, {"T", options_.schedule.T},
          {"stage", stage_},          {"fields", labeled},        {"design", d.values},
          {"raw_design", raw.values}, {"outcome_kind", std::string(to_string(model_->outcome_kind()))},
          {"outcome_support", model_->outcome_support()}};
}

json LiveSession::design() {
  std::lock_guard lock(mu_);
  if (status_ == SessionStatus::kComplete) throw ApiError(409, "session is complete");
  if (status_ == SessionStatus::kRefining) throw ApiError(409, "session is refining");
  if (!pending_) pending_ = next_design(*policy_, history_);
  return design_json(*pending_);
}

json LiveSession::submit_outcome(const json& body, const std::string& key) {
  std::lock_guard lock(mu_);
  if (!key.empty()) {
    if (auto it = replies_.find("outcome:" + key); it != replies_.end()) return it->second;
  }
  if (status_ == SessionStatus::kComplete) throw ApiError(409, "session is complete");
  if (status_ == SessionStatus::kRefining) throw ApiError(409, "session is refining");
  if (!body.is_object() || !body.contains("y") || !body.at("y").is_number()) {
    throw ApiError(422, "body must be {\"y\": number}; outcome must be " + model_->outcome_support());
  }
  const double y = body.at("y").get<double>();
  try {
    model_->validate_outcome(y);
  } catch (const SupportError&) {
    throw ApiError(422, "outcome must be " + model_->outcome_support());
  }
  if (!pending_) pending_ = next_design(*policy_, history_);
  const RawDesign raw = *pending_;
  history_.push_back({raw, constrain_design(*model_, raw), Outcome{y, model_->outcome_kind()}});
  pending_.reset();
  if (history_.size() >= options_.schedule.T) status_ = SessionStatus::kComplete;
  json reply = {{"session_id", id_},
                {"t", history_.size()},
                {"status", std::string(to_string(status_))},
                {"history_length", history_.size()}};
  if (!key.empty()) replies_["outcome:" + key] = reply;
  return reply;
}

void LiveSession::run_refinement(std::size_t budget) {
  History h;
  std::size_t stage = 0;
  std::shared_ptr<const PolicyParams> start;
  {
    std::lock_guard lock(mu_);
    h = history_;
    stage = stage_;
    start = policy_;
  }
  std::string error;
  std::shared_ptr<const ParticlePosterior> post;
  std::shared_ptr<const PolicyParams> refined;
  try {
    Rng prng = Rng(options_.seed).substream(0x1f00 + stage);
    post = std::make_shared<ParticlePosterior>(fit_posterior_is(*model_, h, options_.posterior_samples, prng));
    TrainConfig rc = options_.refine;
    rc.steps = budget;
    rc.seed = mix_seed(options_.seed, 0x2f00 + stage);
    TrainResult r = refine_policy(*model_, *start, ThetaSource::particles(*model_, post), h, options_.schedule.T, rc,
                                  [this](std::size_t step, std::size_t, double objective) {
                                    refine_done_ = step;
                                    refine_objective_ = objective;
                                  });
    if (r.diverged) {
      error = r.diagnostic;
    } else {
      refined = std::make_shared<PolicyParams>(std::move(r.policy));
    }
  } catch (const std::exception& e) {
    error = e.what();
  }
  std::lock_guard lock(mu_);
  if (post) posterior_ = post;
  if (refined) {
    policy_ = refined;
    ++stage_;
  } else {
    log::warn("session " + id_ + ": refinement failed, keeping previous policy: " + error);
  }
  last_error_ = error;
  refined_at_ = h.size();
  pending_.reset();
  status_ = history_.size() >= options_.schedule.T ? SessionStatus::kComplete : SessionStatus::kAwaitingOutcome;
}

json LiveSession::refine(const json& body, const std::string& key) {
  bool wait = false;
  std::size_t budget = 0;
  {
    std::lock_guard lock(mu_);
    if (!key.empty()) {
      if (auto it = replies_.find("refine:" + key); it != replies_.end()) return it->second;
    }
    if (status_ == SessionStatus::kRefining) throw ApiError(409, "refinement already running");
    if (status_ == SessionStatus::kComplete) throw ApiError(409, "session is complete");
    budget = options_.refine.steps;
    for (std::size_t k = 0; k < options_.schedule.taus.size(); ++k) {
      if (options_.schedule.taus[k] == history_.size()) budget = options_.schedule.budgets[k];
    }
    if (body.is_object()) {
      if (body.contains("wait")) {
        if (!body.at("wait").is_boolean()) throw ApiError(400, "'wait' must be a boolean");
        wait = body.at("wait").get<bool>();
      }
      if (body.contains("budget")) {
        if (!body.at("budget").is_number_unsigned()) throw ApiError(400, "'budget' must be a non-negative integer");
        budget = body.at("budget").get<std::size_t>();
      }
    }
    status_ = SessionStatus::kRefining;
    refine_done_ = 0;
    refine_total_ = budget;
    refine_objective_ = 0.0;
  }
  join();
  json reply = {{"session_id", id_}, {"budget", budget}};
  if (wait) {
    run_refinement(budget);
    reply["status"] = std::string(to_string(status()));
    {
      std::lock_guard lock(mu_);
      reply["stage"] = stage_;
      reply["error"] = last_error_;
    }
  } else {
    worker_ = std::thread([this, budget] { run_refinement(budget); });
    reply["status"] = "refining";
  }
  if (!key.empty()) {
    std::lock_guard lock(mu_);
    replies_["refine:" + key] = reply;
  }
  return reply;
}

json LiveSession::posterior() {
  History h;
  std::shared_ptr<const ParticlePosterior> post;
  {
    std::lock_guard lock(mu_);
    h = history_;
    post = posterior_;
  }
  if (!post || post->tau != h.size()) {
    Rng prng = Rng(options_.seed).substream(0x5e55 + h.size());
    post = std::make_shared<ParticlePosterior>(fit_posterior_is(*model_, h, options_.posterior_samples, prng));
    std::lock_guard lock(mu_);
    if (history_.size() == h.size()) posterior_ = post;
  }
  json j = summarize(*model_, *post).to_json();
  j["session_id"] = id_;
  return j;
}

json LiveSession::history_json() const {
  std::lock_guard lock(mu_);
  return {{"session_id", id_},
          {"model", model_->name()},
          {"T", options_.schedule.T},
          {"status", std::string(to_string(status_))},
          {"history", history_to_json(history_)}};
}

std::string LiveSession::history_csv() const {
  std::lock_guard lock(mu_);
  std::ostringstream out;
  write_history_csv(out, *model_, history_);
  return out.str();
}

}  // namespace stepdad
