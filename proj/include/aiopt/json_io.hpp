#pragma once

// JSON encodings for configuration documents, flaws, rules, Q-tables and
// recommendations. Objects are emitted with a fixed field order.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aiopt/core_model.hpp"
#include "aiopt/error.hpp"
#include "aiopt/flawdet.hpp"
#include "aiopt/qlearning.hpp"
#include "aiopt/recommender.hpp"
#include "aiopt/simenv.hpp"

namespace aiopt {

using ojson = nlohmann::ordered_json;

namespace detail {

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("field '") + key + "': " + e.what());
  }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const char* where) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, std::string(where) + " must be a JSON object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw Error(ErrorCode::InvalidConfig, std::string("unknown field '") + k + "' in " + where);
  }
}

}  // namespace detail

// --- core model ------------------------------------------------------------

inline ojson to_json(const SystemSnapshot& s) {
  ojson j;
  j["cpu_util"] = s.cpu_util;
  j["latency_ms"] = s.latency_ms;
  j["throughput_rps"] = s.throughput_rps;
  j["total_cost"] = s.total_cost;
  j["cache_enabled"] = s.cache_enabled;
  j["replicas"] = s.replicas;
  return j;
}

inline ojson to_json(const DiscreteState& s) {
  ojson j;
  j["util_bucket"] = s.util_bucket;
  j["latency_level"] = std::string(to_string(s.latency_level));
  j["cost_level"] = std::string(to_string(s.cost_level));
  j["cache_enabled"] = s.cache_enabled;
  j["replica_bucket"] = std::string(to_string(s.replica_bucket));
  return j;
}

inline DiscreteState discrete_state_from_json(const nlohmann::json& j) {
  auto pick = [&](const char* key, auto values) {
    const auto name = j.at(key).get<std::string>();
    for (auto v : values)
      if (to_string(v) == name) return v;
    throw Error(ErrorCode::MalformedRecord, std::string("bad ") + key + " '" + name + "'");
  };
  DiscreteState s;
  s.util_bucket = j.at("util_bucket").get<int>();
  if (s.util_bucket < 0 || s.util_bucket > 4) throw Error(ErrorCode::MalformedRecord, "util_bucket out of range");
  s.latency_level = pick("latency_level", std::array{LatencyLevel::BelowHalfSlo, LatencyLevel::WithinSlo,
                                                     LatencyLevel::BreachingSlo});
  s.cost_level =
      pick("cost_level", std::array{CostLevel::BelowHalfBudget, CostLevel::WithinBudget, CostLevel::OverBudget});
  s.cache_enabled = j.at("cache_enabled").get<bool>();
  s.replica_bucket =
      pick("replica_bucket", std::array{ReplicaBucket::One, ReplicaBucket::TwoToThree, ReplicaBucket::FourPlus});
  return s;
}

inline ojson to_json(const TargetsConfig& t) {
  ojson j;
  j["slo_latency_ms"] = t.slo_latency_ms;
  j["cost_budget"] = t.cost_budget;
  return j;
}

inline TargetsConfig targets_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"slo_latency_ms", "cost_budget"}, "targets");
  TargetsConfig t;
  detail::read(j, "slo_latency_ms", t.slo_latency_ms);
  detail::read(j, "cost_budget", t.cost_budget);
  t.validate();
  return t;
}

inline ojson to_json(const Deployment& d) {
  ojson j;
  j["replicas"] = d.replicas;
  j["cache_enabled"] = d.cache_enabled;
  return j;
}

inline Deployment deployment_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"replicas", "cache_enabled"}, "deployment");
  Deployment d;
  detail::read(j, "replicas", d.replicas);
  detail::read(j, "cache_enabled", d.cache_enabled);
  if (d.replicas < 1) throw Error(ErrorCode::InvalidConfig, "deployment.replicas must be >= 1");
  return d;
}

// --- simulator --------------------------------------------------------------

inline ojson to_json(const EnvConfig& c) {
  ojson j;
  j["base_service_time_s"] = c.base_service_time_s;
  j["max_replicas"] = c.max_replicas;
  j["replica_price"] = c.replica_price;
  j["cache_price"] = c.cache_price;
  j["license_price"] = c.license_price;
  j["ops_price"] = c.ops_price;
  j["maintenance_base"] = c.maintenance_base;
  j["code_opt_effort_cost"] = c.code_opt_effort_cost;
  j["cache_hit_rate"] = c.cache_hit_rate;
  j["code_opt_speedup"] = c.code_opt_speedup;
  j["imbalance_drift_per_step"] = c.imbalance_drift_per_step;
  j["load_mean_rps"] = c.load_mean_rps;
  j["load_amplitude_rps"] = c.load_amplitude_rps;
  j["load_noise_rps"] = c.load_noise_rps;
  j["episode_length_steps"] = c.episode_length_steps;
  j["rng_seed"] = c.rng_seed;
  return j;
}

inline EnvConfig env_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j,
                         {"base_service_time_s", "max_replicas", "replica_price", "cache_price", "license_price",
                          "ops_price", "maintenance_base", "code_opt_effort_cost", "cache_hit_rate", "code_opt_speedup",
                          "imbalance_drift_per_step", "load_mean_rps", "load_amplitude_rps", "load_noise_rps",
                          "episode_length_steps", "rng_seed"},
                         "env");
  EnvConfig c;
  detail::read(j, "base_service_time_s", c.base_service_time_s);
  detail::read(j, "max_replicas", c.max_replicas);
  detail::read(j, "replica_price", c.replica_price);
  detail::read(j, "cache_price", c.cache_price);
  detail::read(j, "license_price", c.license_price);
  detail::read(j, "ops_price", c.ops_price);
  detail::read(j, "maintenance_base", c.maintenance_base);
  detail::read(j, "code_opt_effort_cost", c.code_opt_effort_cost);
  detail::read(j, "cache_hit_rate", c.cache_hit_rate);
  detail::read(j, "code_opt_speedup", c.code_opt_speedup);
  detail::read(j, "imbalance_drift_per_step", c.imbalance_drift_per_step);
  detail::read(j, "load_mean_rps", c.load_mean_rps);
  detail::read(j, "load_amplitude_rps", c.load_amplitude_rps);
  detail::read(j, "load_noise_rps", c.load_noise_rps);
  detail::read(j, "episode_length_steps", c.episode_length_steps);
  detail::read(j, "rng_seed", c.rng_seed);
  c.validate();
  return c;
}

inline ojson to_json(const EnvState& s) {
  ojson j;
  j["step"] = s.step;
  j["replicas"] = s.replicas;
  j["cache_enabled"] = s.cache_enabled;
  j["code_optimized"] = s.code_optimized;
  j["imbalance"] = s.imbalance;
  j["current_load_rps"] = s.current_load_rps;
  return j;
}

inline EnvState env_state_from_json(const nlohmann::json& j) {
  EnvState s;
  s.step = j.at("step").get<int>();
  s.replicas = j.at("replicas").get<int>();
  s.cache_enabled = j.at("cache_enabled").get<bool>();
  s.code_optimized = j.at("code_optimized").get<bool>();
  s.imbalance = j.at("imbalance").get<double>();
  s.current_load_rps = j.at("current_load_rps").get<double>();
  return s;
}

inline ojson to_json(const CostBreakdown& c) {
  ojson j;
  j["infrastructure"] = c.infrastructure;
  j["licensing"] = c.licensing;
  j["maintenance"] = c.maintenance;
  j["operational"] = c.operational;
  j["total"] = c.total;
  return j;
}

inline CostBreakdown cost_breakdown_from_json(const nlohmann::json& j) {
  return CostBreakdown{j.at("infrastructure").get<double>(), j.at("licensing").get<double>(),
                       j.at("maintenance").get<double>(), j.at("operational").get<double>(),
                       j.at("total").get<double>()};
}

inline ojson to_json(const StepOutcome& o) {
  ojson j;
  j["snapshot"] = to_json(o.snapshot);
  j["cost"] = to_json(o.cost);
  j["env_state"] = to_json(o.env_state);
  return j;
}

// --- agent ------------------------------------------------------------------

constexpr std::string_view to_string(LearningRateSchedule s) {
  return s == LearningRateSchedule::Constant ? "constant" : "inverse_visit_count";
}

inline ojson to_json(const AgentConfig& c) {
  ojson j;
  j["learning_rate"] = c.learning_rate;
  j["discount"] = c.discount;
  j["epsilon_start"] = c.epsilon_start;
  j["epsilon_decay"] = c.epsilon_decay;
  j["epsilon_min"] = c.epsilon_min;
  j["episodes"] = c.episodes;
  j["rng_seed"] = c.rng_seed;
  j["schedule"] = std::string(to_string(c.schedule));
  return j;
}

inline AgentConfig agent_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j,
                         {"learning_rate", "discount", "epsilon_start", "epsilon_decay", "epsilon_min", "episodes",
                          "rng_seed", "schedule"},
                         "agent");
  AgentConfig c;
  detail::read(j, "learning_rate", c.learning_rate);
  detail::read(j, "discount", c.discount);
  detail::read(j, "epsilon_start", c.epsilon_start);
  detail::read(j, "epsilon_decay", c.epsilon_decay);
  detail::read(j, "epsilon_min", c.epsilon_min);
  detail::read(j, "episodes", c.episodes);
  detail::read(j, "rng_seed", c.rng_seed);
  std::string schedule(to_string(c.schedule));
  detail::read(j, "schedule", schedule);
  if (schedule == "constant")
    c.schedule = LearningRateSchedule::Constant;
  else if (schedule == "inverse_visit_count")
    c.schedule = LearningRateSchedule::InverseVisitCount;
  else
    throw Error(ErrorCode::InvalidConfig, "unknown schedule '" + schedule + "'");
  c.validate();
  return c;
}

inline ojson to_json(const RewardWeights& w) {
  ojson j;
  j["w_cost"] = w.w_cost;
  j["w_perf"] = w.w_perf;
  j["w_effort"] = w.w_effort;
  j["cost_ref"] = w.cost_ref;
  j["feedback_reward"] = w.feedback_reward;
  return j;
}

inline RewardWeights reward_weights_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"w_cost", "w_perf", "w_effort", "cost_ref", "feedback_reward"}, "reward_weights");
  RewardWeights w;
  detail::read(j, "w_cost", w.w_cost);
  detail::read(j, "w_perf", w.w_perf);
  detail::read(j, "w_effort", w.w_effort);
  detail::read(j, "cost_ref", w.cost_ref);
  detail::read(j, "feedback_reward", w.feedback_reward);
  w.validate();
  return w;
}

inline ojson to_json(const TrainingStats& s) {
  ojson j;
  j["episodes"] = s.episode_rewards.size();
  j["episode_rewards"] = s.episode_rewards;
  j["final_epsilon"] = s.final_epsilon;
  return j;
}

inline constexpr int kQTableFormatVersion = 1;

/// {version, shape, q, visits, agent_config, reward_weights}; arrays row-major.
inline ojson qtable_to_json(const QTable& q, const AgentConfig& agent, const RewardWeights& weights) {
  ojson j;
  j["version"] = kQTableFormatVersion;
  j["shape"] = {q.states(), q.actions()};
  j["q"] = std::vector<double>(q.values().begin(), q.values().end());
  j["visits"] = std::vector<std::uint64_t>(q.visit_counts().begin(), q.visit_counts().end());
  j["agent_config"] = to_json(agent);
  j["reward_weights"] = to_json(weights);
  return j;
}

struct LoadedQTable {
  QTable q;
  AgentConfig agent_config;
  RewardWeights reward_weights;
};

/// Rejects documents whose shape differs from `expected_states x expected_actions`.
inline LoadedQTable qtable_from_json(const nlohmann::json& j, std::size_t expected_states = kNumStates,
                                     std::size_t expected_actions = kNumActions) {
  try {
    if (j.at("version").get<int>() != kQTableFormatVersion)
      throw Error(ErrorCode::MalformedRecord, "unsupported Q-table version");
    const auto shape = j.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2 || shape[0] != expected_states || shape[1] != expected_actions)
      throw Error(ErrorCode::ShapeMismatch, "Q-table shape " + j.at("shape").dump() + ", expected [" +
                                                std::to_string(expected_states) + "," +
                                                std::to_string(expected_actions) + "]");
    const auto values = j.at("q").get<std::vector<double>>();
    const auto visits = j.at("visits").get<std::vector<std::uint64_t>>();
    const std::size_t n = shape[0] * shape[1];
    if (values.size() != n || visits.size() != n)
      throw Error(ErrorCode::ShapeMismatch, "Q-table arrays do not match the declared shape");
    LoadedQTable out{QTable(shape[0], shape[1]), agent_config_from_json(j.at("agent_config")),
                     reward_weights_from_json(j.at("reward_weights"))};
    for (std::size_t s = 0; s < shape[0]; ++s) {
      for (std::size_t a = 0; a < shape[1]; ++a) {
        out.q.set_value(s, a, values[s * shape[1] + a]);
        out.q.set_visits(s, a, visits[s * shape[1] + a]);
      }
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("Q-table document: ") + e.what());
  }
}

inline ojson to_json(const Recommendation& r) {
  ojson j;
  j["id"] = r.id;
  j["state"] = to_json(r.state);
  j["action"] = std::string(to_string(r.action));
  j["q_value"] = r.q_value;
  j["predicted_savings"] = r.predicted_savings;
  j["effort_cost"] = r.effort_cost;
  j["roi"] = r.roi;
  j["rank"] = r.rank;
  return j;
}

inline Recommendation recommendation_from_json(const nlohmann::json& j) {
  Recommendation r;
  r.id = j.at("id").get<std::string>();
  r.state = discrete_state_from_json(j.at("state"));
  r.action = parse_action(j.at("action").get<std::string>());
  r.q_value = j.at("q_value").get<double>();
  r.predicted_savings = j.at("predicted_savings").get<double>();
  r.effort_cost = j.at("effort_cost").get<double>();
  r.roi = j.at("roi").get<double>();
  r.rank = j.at("rank").get<int>();
  return r;
}

inline ojson to_json(const WhatIfResult& w) {
  ojson j;
  j["predicted_savings"] = w.predicted_savings;
  j["effort_cost"] = w.effort_cost;
  j["roi"] = w.roi;
  j["trajectory"] = ojson::array();
  for (const auto& o : w.trajectory) j["trajectory"].push_back(to_json(o));
  return j;
}

inline ojson to_json(const PolicyStats& s) {
  ojson j;
  j["policy"] = s.policy;
  j["episodes"] = s.episode_costs.size();
  j["mean_total_cost"] = s.mean_total_cost;
  j["min_total_cost"] = s.min_total_cost;
  j["max_total_cost"] = s.max_total_cost;
  j["mean_total_reward"] = s.mean_total_reward;
  return j;
}

// --- flaws ------------------------------------------------------------------

inline ojson to_json(const Flaw& f) {
  ojson j;
  j["rule_or_detector"] = f.rule_or_detector;
  j["metric"] = std::string(to_string(f.metric));
  j["first_ts"] = f.first_ts;
  j["last_ts"] = f.last_ts;
  j["observed"] = f.observed;
  j["expected"] = f.expected;
  j["severity"] = std::string(to_string(f.severity));
  j["suggested_action"] = f.suggested_action ? ojson(std::string(to_string(*f.suggested_action))) : ojson(nullptr);
  return j;
}

inline MetricName parse_metric_name(const std::string& name) {
  auto m = metric_from_string(name);
  if (!m) throw Error(ErrorCode::UnknownMetric, "unknown metric '" + name + "'");
  return *m;
}

inline Flaw flaw_from_json(const nlohmann::json& j) {
  Flaw f;
  f.rule_or_detector = j.at("rule_or_detector").get<std::string>();
  f.metric = parse_metric_name(j.at("metric").get<std::string>());
  f.first_ts = j.at("first_ts").get<std::int64_t>();
  f.last_ts = j.at("last_ts").get<std::int64_t>();
  f.observed = j.at("observed").get<double>();
  f.expected = j.at("expected").get<std::string>();
  f.severity = parse_severity(j.at("severity").get<std::string>());
  if (!j.at("suggested_action").is_null()) f.suggested_action = parse_action(j.at("suggested_action").get<std::string>());
  return f;
}

inline ojson to_json(const FlawRule& r) {
  ojson j;
  j["id"] = r.id;
  j["metric"] = std::string(to_string(r.metric));
  j["comparator"] = std::string(to_string(r.comparator));
  j["bound"] = r.bound;
  j["consecutive"] = r.consecutive;
  j["severity"] = std::string(to_string(r.severity));
  j["suggested_action"] = r.suggested_action ? ojson(std::string(to_string(*r.suggested_action))) : ojson(nullptr);
  return j;
}

inline FlawRule flaw_rule_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"id", "metric", "comparator", "bound", "consecutive", "severity", "suggested_action"},
                         "rule");
  try {
    FlawRule r;
    r.id = j.at("id").get<std::string>();
    r.metric = parse_metric_name(j.at("metric").get<std::string>());
    r.comparator = parse_comparator(j.at("comparator").get<std::string>());
    r.bound = j.at("bound").get<double>();
    const auto consecutive = j.at("consecutive").get<long long>();
    if (consecutive < 1) throw Error(ErrorCode::InvalidConfig, "rule '" + r.id + "': consecutive must be >= 1");
    r.consecutive = static_cast<std::size_t>(consecutive);
    r.severity = parse_severity(j.at("severity").get<std::string>());
    auto it = j.find("suggested_action");
    if (it != j.end() && !it->is_null()) r.suggested_action = parse_action(it->get<std::string>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("rule: ") + e.what());
  }
}

/// Rule file: JSON array of rule objects with unique ids.
inline std::vector<FlawRule> rules_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidConfig, "rule set must be a JSON array");
  std::vector<FlawRule> rules;
  std::set<std::string> ids;
  for (const auto& item : j) {
    rules.push_back(flaw_rule_from_json(item));
    if (!ids.insert(rules.back().id).second)
      throw Error(ErrorCode::InvalidConfig, "duplicate rule id '" + rules.back().id + "'");
  }
  return rules;
}

inline ojson to_json(const DetectorConfig& c) {
  ojson j;
  j["window_size"] = c.window_size;
  j["z_threshold"] = c.z_threshold;
  j["percentile"] = c.percentile;
  j["percentile_detection"] = c.percentile_detection;
  ojson bounds = ojson::object();
  for (const auto& [m, b] : c.static_bounds) bounds[std::string(to_string(m))] = {b.min, b.max};
  j["static_bounds"] = bounds;
  return j;
}

inline DetectorConfig detector_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"window_size", "z_threshold", "percentile", "percentile_detection", "static_bounds"},
                         "detector");
  DetectorConfig c;
  detail::read(j, "window_size", c.window_size);
  detail::read(j, "z_threshold", c.z_threshold);
  detail::read(j, "percentile", c.percentile);
  detail::read(j, "percentile_detection", c.percentile_detection);
  if (auto it = j.find("static_bounds"); it != j.end() && !it->is_null()) {
    for (const auto& [name, pair] : it->items()) {
      const auto mm = pair.get<std::vector<double>>();
      if (mm.size() != 2 || mm[0] > mm[1])
        throw Error(ErrorCode::InvalidConfig, "static_bounds." + name + " must be [min, max] with min <= max");
      c.static_bounds[parse_metric_name(name)] = Bounds{mm[0], mm[1]};
    }
  }
  c.validate();
  return c;
}

// --- configuration document -------------------------------------------------

/// Shared configuration document for the CLI and the service.
struct AppConfig {
  EnvConfig env;
  TargetsConfig targets;
  AgentConfig agent;
  RewardWeights reward_weights;
  DetectorConfig detector;
  std::vector<FlawRule> rules;
  Deployment deployment;
  std::int64_t window_ms = 60'000;  // step window for snapshot aggregation
  std::size_t max_body_bytes = 8u << 20;
};

inline ojson to_json(const AppConfig& c) {
  ojson j;
  j["env"] = to_json(c.env);
  j["targets"] = to_json(c.targets);
  j["agent"] = to_json(c.agent);
  j["reward_weights"] = to_json(c.reward_weights);
  j["detector"] = to_json(c.detector);
  j["rules"] = ojson::array();
  for (const auto& r : c.rules) j["rules"].push_back(to_json(r));
  j["deployment"] = to_json(c.deployment);
  j["window_ms"] = c.window_ms;
  j["max_body_bytes"] = c.max_body_bytes;
  return j;
}

inline AppConfig app_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j,
                         {"env", "targets", "agent", "reward_weights", "detector", "rules", "deployment", "window_ms",
                          "max_body_bytes"},
                         "config");
  AppConfig c;
  auto sub = [&](const char* key) -> const nlohmann::json* {
    auto it = j.find(key);
    return it == j.end() || it->is_null() ? nullptr : &*it;
  };
  if (auto* e = sub("env")) c.env = env_config_from_json(*e);
  if (auto* t = sub("targets")) c.targets = targets_from_json(*t);
  if (auto* a = sub("agent")) c.agent = agent_config_from_json(*a);
  if (auto* w = sub("reward_weights")) c.reward_weights = reward_weights_from_json(*w);
  if (auto* d = sub("detector")) c.detector = detector_config_from_json(*d);
  if (auto* r = sub("rules")) c.rules = rules_from_json(*r);
  if (auto* d = sub("deployment")) c.deployment = deployment_from_json(*d);
  detail::read(j, "window_ms", c.window_ms);
  detail::read(j, "max_body_bytes", c.max_body_bytes);
  if (c.window_ms < 1) throw Error(ErrorCode::InvalidConfig, "window_ms must be >= 1");
  return c;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::MalformedRecord, "'" + path + "' is not valid JSON");
  return j;
}

inline AppConfig load_app_config(const std::string& path) { return app_config_from_json(read_json_file(path)); }

}  // namespace aiopt
