#include <httplib.h>

#include <regex>

#include "stepdad/errors.hpp"
#include "stepdad/log.hpp"
#include "stepdad/session.hpp"

namespace stepdad {

using nlohmann::json;

SessionService::SessionService(EngineConfig config, std::shared_ptr<const PolicyParams> base)
    : config_(std::move(config)), model_(config_.make_model()), base_(std::move(base)) {
  if (!base_) {
    Rng rng(config_.seed);
    base_ = std::make_shared<PolicyParams>(
        PolicyParams::build(config_.policy_spec(*model_), model_->design_dim(), rng));
  }
  if (base_->design_dim != model_->design_dim()) {
    throw DimensionError("serve: checkpoint design width does not match the model");
  }
}

SessionService::~SessionService() {
  std::lock_guard lock(mu_);
  for (auto& [id, s] : sessions_) s->join();
}

std::shared_ptr<LiveSession> SessionService::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::shared_ptr<LiveSession> SessionService::create(const json& body, const std::string& key) {
  if (!body.is_null() && !body.is_object()) throw ApiError(400, "session body must be a JSON object");
  std::lock_guard lock(mu_);
  if (!key.empty()) {
    if (auto it = created_by_key_.find(key); it != created_by_key_.end()) return sessions_.at(it->second);
  }
  // Session bodies may override the seed and the schedule; everything else
  // comes from the server's config.
  json doc = config_.to_json();
  if (body.is_object()) {
    for (const auto& [k, v] : body.items()) {
      if (k == "seed") {
        doc["seed"] = v;
      } else if (k == "T" || k == "taus" || k == "budgets" || k == "posterior_samples") {
        doc["schedule"][k] = v;
      } else if (k == "refine_steps") {
        doc["refine"]["steps"] = v;
      } else {
        throw ApiError(400, "unknown session field '" + k + "'");
      }
    }
  }
  EngineConfig cfg;
  try {
    cfg = EngineConfig::from_json(doc);
  } catch (const std::exception& e) {
    throw ApiError(400, e.what());
  }
  SessionOptions opts;
  opts.seed = cfg.seed;
  opts.schedule = cfg.refinement_schedule(*model_);
  opts.refine = cfg.refine_config(*model_);
  opts.posterior_samples = cfg.posterior_samples();
  const std::string id = "s" + std::to_string(next_id_++);
  auto s = std::make_shared<LiveSession>(id, model_, base_, opts);
  sessions_[id] = s;
  if (!key.empty()) created_by_key_[key] = id;
  return s;
}

ApiResponse SessionService::handle(const std::string& method, const std::string& path, const std::string& body,
                                   const std::string& key, const std::string& query) {
  static const std::regex kSessionRoute("^/sessions/([A-Za-z0-9_-]+)(?:/([a-z]+))?/?$");
  ApiResponse res;
  try {
    json payload;
    if (!body.empty()) {
      try {
        payload = json::parse(body);
      } catch (const json::exception&) {
        throw ApiError(400, "request body is not valid JSON");
      }
    }
    if (path == "/health" && method == "GET") {
      res.body = {{"ok", true}, {"model", model_->name()}};
      return res;
    }
    if ((path == "/sessions" || path == "/sessions/") && method == "POST") {
      auto s = create(payload, key);
      res.status = 201;
      res.body = s->status_json();
      return res;
    }
    std::smatch m;
    if (!std::regex_match(path, m, kSessionRoute)) throw ApiError(404, "no route for " + method + " " + path);
    auto s = find(m[1].str());
    if (!s) throw ApiError(404, "unknown session '" + m[1].str() + "'");
    const std::string action = m[2].str();
    if (method == "GET" && (action.empty() || action == "status")) {
      res.body = s->status_json();
    } else if (method == "GET" && action == "design") {
      res.body = s->design();
    } else if (method == "POST" && action == "outcome") {
      res.body = s->submit_outcome(payload, key);
    } else if (method == "POST" && action == "refine") {
      res.body = s->refine(payload, key);
      res.status = res.body.value("status", "") == "refining" ? 202 : 200;
    } else if (method == "GET" && action == "posterior") {
      res.body = s->posterior();
    } else if (method == "GET" && action == "history") {
      if (query.find("format=csv") != std::string::npos) {
        res.content_type = "text/csv";
        res.text = s->history_csv();
      } else {
        res.body = s->history_json();
      }
    } else {
      throw ApiError(404, "no route for " + method + " " + path);
    }
  } catch (const ApiError& e) {
    res.status = e.status();
    res.body = {{"error", e.what()}};
  } catch (const ConfigError& e) {
    res.status = 400;
    res.body = {{"error", e.what()}};
  } catch (const std::exception& e) {
    res.status = 500;
    res.body = {{"error", e.what()}};
  }
  return res;
}

struct HttpServer::Impl {
  SessionService& service;
  httplib::Server server;
  explicit Impl(SessionService& s) : service(s) {}
};

HttpServer::HttpServer(SessionService& service) : impl_(std::make_unique<Impl>(service)) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    std::string query;
    for (const auto& [k, v] : req.params) query += (query.empty() ? "" : "&") + k + "=" + v;
    std::string key = req.get_header_value("Idempotency-Key");
    ApiResponse r = impl_->service.handle(req.method, req.path, req.body, key, query);
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    if (r.text.empty()) {
      res.set_content(r.body.dump(), "application/json");
    } else {
      res.set_content(r.text, r.content_type);
    }
  };
  impl_->server.Get(".*", forward);
  impl_->server.Post(".*", forward);
  impl_->server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, Idempotency-Key");
    res.status = 204;
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw IoError("serve: cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) throw IoError("serve: cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace stepdad
