#pragma once

// HTTP/1.1 JSON API over an in-memory, single-tenant session store.
//
// Mutations (ingest, train commit, feedback) are serialized through one
// writer mutex and publish a new immutable SessionState; readers grab the
// current state pointer and never block writers for longer than the swap.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <type_traits>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "aiopt/core_model.hpp"
#include "aiopt/error.hpp"
#include "aiopt/flawdet.hpp"
#include "aiopt/ingest.hpp"
#include "aiopt/json_io.hpp"
#include "aiopt/pipeline.hpp"
#include "aiopt/recommender.hpp"
#include "aiopt/reporting.hpp"
#include "aiopt/simenv.hpp"

namespace aiopt {

inline std::int64_t now_epoch_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

/// Replaces every non-finite number with null, recursively.
inline void sanitize_numbers(ojson& j) {
  if (j.is_number_float()) {
    if (!std::isfinite(j.get<double>())) j = nullptr;
  } else if (j.is_structured()) {
    for (auto& child : j) sanitize_numbers(child);
  }
}

struct SessionState {
  std::uint64_t revision = 0;
  AppConfig config;
  std::optional<QTable> q;
  std::shared_ptr<const std::vector<MetricSample>> samples = std::make_shared<std::vector<MetricSample>>();
  std::vector<Recommendation> last_issued;
};

class SessionStore {
 public:
  explicit SessionStore(AppConfig config) {
    auto s = std::make_shared<SessionState>();
    s->config = std::move(config);
    state_ = std::move(s);
  }

  std::shared_ptr<const SessionState> snapshot() const {
    std::shared_lock lock(ptr_mu_);
    return state_;
  }

  std::uint64_t revision() const { return snapshot()->revision; }

  /// Runs `mutate` on a private copy under the writer lock and publishes it.
  /// When `bump` is set the revision advances by exactly one.
  template <class F>
  auto commit(F&& mutate, bool bump = true) {
    std::lock_guard writer(write_mu_);
    auto next = std::make_shared<SessionState>(*snapshot());
    if constexpr (std::is_void_v<decltype(mutate(*next, book_))>) {
      mutate(*next, book_);
      if (bump) ++next->revision;
      publish(std::move(next));
    } else {
      auto result = mutate(*next, book_);
      if (bump) ++next->revision;
      publish(std::move(next));
      return result;
    }
  }

  bool try_begin_training() { return !training_.exchange(true); }
  void end_training() { training_.store(false); }
  bool training_in_progress() const { return training_.load(); }

 private:
  void publish(std::shared_ptr<SessionState> next) {
    std::unique_lock lock(ptr_mu_);
    state_ = std::move(next);
  }

  mutable std::shared_mutex ptr_mu_;
  std::mutex write_mu_;
  std::shared_ptr<const SessionState> state_;
  RecommendationBook book_;
  std::atomic<bool> training_{false};
};

/// Session persistence document: Q-table (if trained) and the ingest buffer.
inline ojson session_to_json(const SessionState& s) {
  ojson j;
  j["revision"] = s.revision;
  j["qtable"] = s.q ? qtable_to_json(*s.q, s.config.agent, s.config.reward_weights) : ojson(nullptr);
  j["samples"] = ojson::array();
  for (const auto& m : *s.samples) j["samples"].push_back(to_json(m));
  return j;
}

class ApiServer {
 public:
  explicit ApiServer(AppConfig config) : store_(std::move(config)) {
    server_.set_payload_max_length(store_.snapshot()->config.max_body_bytes);
    routes();
  }

  SessionStore& store() { return store_; }
  httplib::Server& http() { return server_; }

  bool mount_ui(const std::string& dir) { return server_.set_mount_point("/ui", dir); }

  /// Blocking listen; returns false if the address cannot be bound.
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

  void load_session(const nlohmann::json& j) {
    store_.commit(
        [&](SessionState& s, RecommendationBook&) {
          if (!j.at("qtable").is_null()) s.q = qtable_from_json(j.at("qtable")).q;
          auto samples = std::make_shared<std::vector<MetricSample>>();
          for (const auto& m : j.at("samples")) samples->push_back(parse_metric_line(m.dump()));
          s.samples = std::move(samples);
          s.revision = j.value("revision", std::uint64_t{0});
        },
        /*bump=*/false);
  }

 private:
  static void send_json(httplib::Response& res, ojson body, int status = 200) {
    sanitize_numbers(body);
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    ojson body;
    body["error"] = std::string(code);
    body["message"] = message;
    send_json(res, std::move(body), status);
  }

  static int status_for(ErrorCode code) {
    switch (code) {
      case ErrorCode::UnknownRecommendation: return 404;
      case ErrorCode::AlreadyResolved: return 409;
      case ErrorCode::MalformedRecord: return 400;
      default: return 422;
    }
  }

  template <class Handler>
  static httplib::Server::Handler guarded(Handler h) {
    return [h](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const Error& e) {
        send_error(res, status_for(e.code()), to_string(e.code()), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "InternalError", e.what());
      }
    };
  }

  void routes() {
    server_.Post("/api/v1/metrics", guarded([this](const auto& req, auto& res) { ingest(req, res); }));
    server_.Post("/api/v1/train", guarded([this](const auto& req, auto& res) { train_handler(req, res); }));
    server_.Get("/api/v1/recommendations",
                guarded([this](const auto& req, auto& res) { recommendations(req, res); }));
    server_.Post(R"(/api/v1/recommendations/([^/]+)/feedback)",
                 guarded([this](const auto& req, auto& res) { feedback(req, res); }));
    server_.Post("/api/v1/simulate", guarded([this](const auto& req, auto& res) { simulate(req, res); }));
    server_.Get("/api/v1/flaws", guarded([this](const auto& req, auto& res) { flaws(req, res); }));
    server_.Get("/api/v1/kpis", guarded([this](const auto& req, auto& res) { kpis(req, res); }));
    server_.Get("/api/v1/report", guarded([this](const auto& req, auto& res) { report(req, res); }));
    server_.Get("/api/v1/state", guarded([this](const auto& req, auto& res) { state(req, res); }));
  }

  static std::optional<nlohmann::json> parse_body(const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded()) {
      send_error(res, 400, "MalformedBody", "request body is not valid JSON");
      return std::nullopt;
    }
    return body;
  }

  void ingest(const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req, res);
    if (!body) return;
    if (!body->is_array()) return send_error(res, 400, "MalformedBody", "expected a JSON array of metric records");

    std::vector<MetricSample> accepted;
    ojson rejected = ojson::array();
    for (std::size_t i = 0; i < body->size(); ++i) {
      try {
        accepted.push_back(parse_metric_line((*body)[i].dump()));
      } catch (const Error& e) {
        rejected.push_back({{"index", i}, {"error", std::string(to_string(e.code()))}, {"reason", e.what()}});
      }
    }
    const auto revision = store_.commit([&](SessionState& s, RecommendationBook&) {
      auto merged = std::make_shared<std::vector<MetricSample>>(*s.samples);
      merged->insert(merged->end(), accepted.begin(), accepted.end());
      s.samples = std::move(merged);
      return s.revision + 1;
    });
    ojson out;
    out["ingested"] = accepted.size();
    out["rejected"] = rejected.size();
    out["rejections"] = std::move(rejected);
    out["revision"] = revision;
    send_json(res, std::move(out));
  }

  void train_handler(const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body = nlohmann::json::object();
    if (!req.body.empty()) {
      auto parsed = parse_body(req, res);
      if (!parsed) return;
      body = std::move(*parsed);
    }
    if (!body.is_object()) return send_error(res, 422, "InvalidOverrides", "expected a JSON object");

    auto base = store_.snapshot();
    AppConfig cfg = base->config;
    if (auto it = body.find("episodes"); it != body.end()) {
      if (!it->is_number_integer() || it->get<long long>() < 1 || it->get<long long>() > 10'000'000)
        return send_error(res, 422, "InvalidOverrides", "episodes must be an integer in [1, 10000000]");
      cfg.agent.episodes = it->get<int>();
    }
    if (auto it = body.find("seed"); it != body.end()) {
      if (!it->is_number_unsigned())
        return send_error(res, 422, "InvalidOverrides", "seed must be a non-negative integer");
      cfg.env.rng_seed = it->get<std::uint64_t>();
      cfg.agent.rng_seed = it->get<std::uint64_t>();
    }

    if (!store_.try_begin_training()) return send_error(res, 409, "TrainingInProgress", "a training job is running");
    struct Guard {
      SessionStore& s;
      ~Guard() { s.end_training(); }
    } guard{store_};

    auto result = train(cfg.env, cfg.targets, cfg.agent, cfg.reward_weights);
    const auto revision = store_.commit([&](SessionState& s, RecommendationBook&) {
      s.q = std::move(result.q);
      return s.revision + 1;
    });

    const auto& rewards = result.stats.episode_rewards;
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    ojson out;
    out["episodes"] = rewards.size();
    out["final_epsilon"] = result.stats.final_epsilon;
    out["mean_episode_reward"] = mean;
    out["first_episode_reward"] = rewards.front();
    out["last_episode_reward"] = rewards.back();
    out["episode_rewards"] = rewards;
    out["revision"] = revision;
    send_json(res, std::move(out));
  }

  void recommendations(const httplib::Request& req, httplib::Response& res) {
    int top = 3;
    if (req.has_param("top")) {
      const auto raw = req.get_param_value("top");
      std::size_t used = 0;
      try {
        top = std::stoi(raw, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != raw.size() || raw.empty() || top < 1 || top > static_cast<int>(kNumActions))
        return send_error(res, 422, "InvalidTop", "top must be an integer in [1, 7]");
    }
    auto snap = store_.snapshot();
    if (!snap->q) return send_error(res, 409, "NotTrained", "no trained Q-table; POST /api/v1/train first");
    auto view = current_view(*snap->samples, snap->config);
    if (!view) return send_error(res, 409, "NoData", "no complete metric window ingested");

    auto recs = recommend(*snap->q, view->state, view->env, top, snap->config.env, ids_);
    // Issuing is recorded without a revision bump: it does not change learned state.
    store_.commit(
        [&](SessionState& s, RecommendationBook& book) {
          book.issue(recs);
          s.last_issued = recs;
        },
        /*bump=*/false);
    ojson out = ojson::array();
    for (const auto& r : recs) out.push_back(to_json(r));
    send_json(res, std::move(out));
  }

  void feedback(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto body = parse_body(req, res);
    if (!body) return;
    std::optional<Decision> decision;
    if (body->is_object() && body->contains("decision") && (*body)["decision"].is_string()) {
      const auto d = (*body)["decision"].get<std::string>();
      if (d == "accept") decision = Decision::Accept;
      if (d == "reject") decision = Decision::Reject;
    }
    if (!decision) return send_error(res, 422, "InvalidDecision", "decision must be \"accept\" or \"reject\"");

    const FeedbackEvent event{id, *decision, now_epoch_ms()};
    const auto [value, revision] = store_.commit([&](SessionState& s, RecommendationBook& book) {
      if (!book.contains(id)) throw Error(ErrorCode::UnknownRecommendation, "unknown recommendation '" + id + "'");
      if (!s.q) throw Error(ErrorCode::UnknownRecommendation, "no Q-table for recommendation '" + id + "'");
      const double v = apply_feedback(*s.q, event, book, s.config.reward_weights, s.config.agent);
      return std::pair{v, s.revision + 1};
    });
    ojson out;
    out["new_q_value"] = value;
    out["revision"] = revision;
    send_json(res, std::move(out));
  }

  void simulate(const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req, res);
    if (!body) return;
    if (!body->is_object() || !body->contains("action") || !(*body)["action"].is_string())
      return send_error(res, 422, "UnknownAction", "action must be an action name");
    auto action = action_from_string((*body)["action"].get<std::string>());
    if (!action) return send_error(res, 422, "UnknownAction", "unknown action");
    int horizon = kDefaultHorizon;
    if (auto it = body->find("horizon"); it != body->end()) {
      if (!it->is_number_integer() || it->get<long long>() < 1 || it->get<long long>() > 100'000)
        return send_error(res, 422, "InvalidHorizon", "horizon must be an integer >= 1");
      horizon = it->get<int>();
    }
    auto snap = store_.snapshot();
    auto view = current_view(*snap->samples, snap->config);
    const EnvState origin = view ? view->env : reset(snap->config.env);
    send_json(res, to_json(simulate_whatif(origin, *action, snap->config.env, horizon)));
  }

  static std::vector<Flaw> flaws_of(const SessionState& s) { return detect_in(*s.samples, s.config); }

  void flaws(const httplib::Request&, httplib::Response& res) {
    auto snap = store_.snapshot();
    const auto found = flaws_of(*snap);
    const auto diag = diagnose(found);
    ojson out;
    out["flaws"] = ojson::array();
    for (const auto& f : found) out["flaws"].push_back(to_json(f));
    out["summary"] = diag.summary;
    send_json(res, std::move(out));
  }

  static Report report_of(const SessionState& s) {
    return report_from_samples(*s.samples, s.config, s.last_issued, now_epoch_ms());
  }

  void kpis(const httplib::Request&, httplib::Response& res) {
    auto report = report_of(*store_.snapshot());
    ojson out;
    out["empty"] = !report.kpis.has_value();
    out["kpis"] = report.kpis ? to_json(*report.kpis) : ojson(nullptr);
    send_json(res, std::move(out));
  }

  void report(const httplib::Request& req, httplib::Response& res) {
    const std::string format = req.has_param("format") ? req.get_param_value("format") : "json";
    if (format != "json" && format != "csv")
      return send_error(res, 422, "UnsupportedFormat", "format must be json or csv");
    auto report = report_of(*store_.snapshot());
    if (format == "csv") {
      res.set_content(export_csv(report), "text/csv");
      return;
    }
    send_json(res, to_json(report));
  }

  void state(const httplib::Request&, httplib::Response& res) {
    auto snap = store_.snapshot();
    auto view = current_view(*snap->samples, snap->config);
    ojson out;
    out["revision"] = snap->revision;
    out["trained"] = snap->q.has_value();
    out["samples"] = snap->samples->size();
    out["snapshot"] = view ? to_json(view->snapshot) : ojson(nullptr);
    out["discrete_state"] = view ? to_json(view->state) : ojson(nullptr);
    out["state_index"] = view ? ojson(state_index(view->state)) : ojson(nullptr);
    send_json(res, std::move(out));
  }

  SessionStore store_;
  httplib::Server server_;
  IdSource ids_;
};

}  // namespace aiopt
