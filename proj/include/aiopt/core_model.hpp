#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aiopt/error.hpp"

namespace aiopt {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

enum class MetricName {
  LatencyMs,
  ThroughputRps,
  CpuUtil,
  CostInfra,
  CostLicense,
  CostMaintenance,
  CostOps,
};

inline constexpr std::array<MetricName, 7> kAllMetrics = {
    MetricName::LatencyMs,   MetricName::ThroughputRps,   MetricName::CpuUtil, MetricName::CostInfra,
    MetricName::CostLicense, MetricName::CostMaintenance, MetricName::CostOps,
};

constexpr std::string_view to_string(MetricName m) {
  switch (m) {
    case MetricName::LatencyMs: return "latency_ms";
    case MetricName::ThroughputRps: return "throughput_rps";
    case MetricName::CpuUtil: return "cpu_util";
    case MetricName::CostInfra: return "cost_infra";
    case MetricName::CostLicense: return "cost_license";
    case MetricName::CostMaintenance: return "cost_maintenance";
    case MetricName::CostOps: return "cost_ops";
  }
  return "";
}

inline std::optional<MetricName> metric_from_string(std::string_view name) {
  for (auto m : kAllMetrics) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

constexpr bool is_cost_metric(MetricName m) {
  return m == MetricName::CostInfra || m == MetricName::CostLicense || m == MetricName::CostMaintenance ||
         m == MetricName::CostOps;
}

/// Natural unit tag for a metric.
constexpr std::string_view default_unit(MetricName m) {
  switch (m) {
    case MetricName::LatencyMs: return "ms";
    case MetricName::ThroughputRps: return "rps";
    case MetricName::CpuUtil: return "fraction";
    default: return "currency-per-step";
  }
}

struct MetricSample {
  std::int64_t timestamp = 0;  // epoch ms, UTC
  std::string source;
  MetricName metric = MetricName::LatencyMs;
  double value = 0.0;
  std::string unit;

  friend bool operator==(const MetricSample&, const MetricSample&) = default;
};

/// Checks the per-metric invariants; throws ValidationFailure.
inline void validate(const MetricSample& s) {
  if (s.timestamp <= 0) throw Error(ErrorCode::ValidationFailure, "ts must be > 0");
  if (!std::isfinite(s.value)) throw Error(ErrorCode::ValidationFailure, "value must be finite");
  if (s.metric == MetricName::CpuUtil) {
    if (s.value < 0.0 || s.value > 1.0)
      throw Error(ErrorCode::ValidationFailure, "cpu_util must lie in [0, 1]");
  } else if (s.value < 0.0) {
    throw Error(ErrorCode::ValidationFailure, std::string(to_string(s.metric)) + " must be >= 0");
  }
}

/// Parses one JSON-Lines metric record:
/// {"ts":<int ms>,"source":<str>,"metric":<name>,"value":<number>,"unit":<str>}
inline MetricSample parse_metric_line(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::MalformedRecord, "not a JSON object");

  auto field = [&](const char* key) -> const nlohmann::json& {
    auto it = j.find(key);
    if (it == j.end()) throw Error(ErrorCode::MalformedRecord, std::string("missing field '") + key + "'");
    return *it;
  };
  const auto& ts = field("ts");
  const auto& source = field("source");
  const auto& metric = field("metric");
  const auto& value = field("value");
  const auto& unit = field("unit");
  if (!ts.is_number_integer()) throw Error(ErrorCode::MalformedRecord, "'ts' must be an integer");
  if (!source.is_string() || !metric.is_string() || !unit.is_string())
    throw Error(ErrorCode::MalformedRecord, "'source', 'metric' and 'unit' must be strings");
  if (!value.is_number()) throw Error(ErrorCode::MalformedRecord, "'value' must be a number");

  auto name = metric_from_string(metric.get<std::string>());
  if (!name) throw Error(ErrorCode::UnknownMetric, "unknown metric '" + metric.get<std::string>() + "'");

  MetricSample s{ts.get<std::int64_t>(), source.get<std::string>(), *name, value.get<double>(),
                 unit.get<std::string>()};
  validate(s);
  return s;
}

inline nlohmann::ordered_json to_json(const MetricSample& s) {
  nlohmann::ordered_json j;
  j["ts"] = s.timestamp;
  j["source"] = s.source;
  j["metric"] = std::string(to_string(s.metric));
  j["value"] = s.value;
  j["unit"] = s.unit;
  return j;
}

inline std::string serialize_metric_line(const MetricSample& s) { return to_json(s).dump(); }

// ---------------------------------------------------------------------------
// Snapshots and targets
// ---------------------------------------------------------------------------

struct SystemSnapshot {
  double cpu_util = 0.0;
  double latency_ms = 0.0;
  double throughput_rps = 0.0;
  double total_cost = 0.0;
  bool cache_enabled = false;
  int replicas = 1;

  friend bool operator==(const SystemSnapshot&, const SystemSnapshot&) = default;
};

struct TargetsConfig {
  double slo_latency_ms = 200.0;
  double cost_budget = 30.0;

  void validate() const {
    if (!(slo_latency_ms > 0.0) || !(cost_budget > 0.0))
      throw Error(ErrorCode::InvalidConfig, "slo_latency_ms and cost_budget must be > 0");
  }
};

/// Deployment facts the metric stream does not carry.
struct Deployment {
  int replicas = 2;
  bool cache_enabled = false;
};

namespace detail {

// Order-independent sum: identical result for any permutation of the input.
inline double stable_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

inline double stable_mean(std::vector<double> values) {
  const auto n = static_cast<double>(values.size());
  return stable_sum(std::move(values)) / n;
}

}  // namespace detail

/// Latest sample of each cost metric in the window, keyed by metric. Ties on
/// timestamp resolve to the larger value so the choice is order-independent.
inline std::map<MetricName, double> latest_costs(std::span<const MetricSample> samples) {
  std::map<MetricName, std::pair<std::int64_t, double>> latest;
  for (const auto& s : samples) {
    if (!is_cost_metric(s.metric)) continue;
    auto [it, inserted] = latest.try_emplace(s.metric, s.timestamp, s.value);
    if (!inserted && std::pair(s.timestamp, s.value) > it->second) it->second = {s.timestamp, s.value};
  }
  std::map<MetricName, double> out;
  for (const auto& [m, tv] : latest) out[m] = tv.second;
  return out;
}

inline SystemSnapshot aggregate_snapshot(std::span<const MetricSample> samples, const Deployment& deployment = {}) {
  std::vector<double> latency, cpu, throughput;
  for (const auto& s : samples) {
    switch (s.metric) {
      case MetricName::LatencyMs: latency.push_back(s.value); break;
      case MetricName::CpuUtil: cpu.push_back(s.value); break;
      case MetricName::ThroughputRps: throughput.push_back(s.value); break;
      default: break;
    }
  }
  const auto costs = latest_costs(samples);
  if (latency.empty()) throw Error(ErrorCode::IncompleteWindow, "no latency_ms samples in window");
  if (cpu.empty()) throw Error(ErrorCode::IncompleteWindow, "no cpu_util samples in window");
  if (costs.empty()) throw Error(ErrorCode::IncompleteWindow, "no cost_* samples in window");

  std::vector<double> cost_values;
  for (const auto& [m, v] : costs) cost_values.push_back(v);

  SystemSnapshot snap;
  snap.latency_ms = detail::stable_mean(std::move(latency));
  snap.cpu_util = detail::stable_mean(std::move(cpu));
  snap.throughput_rps = throughput.empty() ? 0.0 : detail::stable_mean(std::move(throughput));
  snap.total_cost = detail::stable_sum(std::move(cost_values));
  snap.cache_enabled = deployment.cache_enabled;
  snap.replicas = deployment.replicas;
  return snap;
}

// ---------------------------------------------------------------------------
// Discrete state space: 5 x 3 x 3 x 2 x 3 = 270 states
// ---------------------------------------------------------------------------

enum class LatencyLevel { BelowHalfSlo, WithinSlo, BreachingSlo };
enum class CostLevel { BelowHalfBudget, WithinBudget, OverBudget };
enum class ReplicaBucket { One, TwoToThree, FourPlus };

constexpr std::string_view to_string(LatencyLevel l) {
  switch (l) {
    case LatencyLevel::BelowHalfSlo: return "below_half_slo";
    case LatencyLevel::WithinSlo: return "within_slo";
    case LatencyLevel::BreachingSlo: return "breaching_slo";
  }
  return "";
}

constexpr std::string_view to_string(CostLevel c) {
  switch (c) {
    case CostLevel::BelowHalfBudget: return "below_half_budget";
    case CostLevel::WithinBudget: return "within_budget";
    case CostLevel::OverBudget: return "over_budget";
  }
  return "";
}

constexpr std::string_view to_string(ReplicaBucket r) {
  switch (r) {
    case ReplicaBucket::One: return "one";
    case ReplicaBucket::TwoToThree: return "two_to_three";
    case ReplicaBucket::FourPlus: return "four_plus";
  }
  return "";
}

struct DiscreteState {
  int util_bucket = 0;  // [0, 4]
  LatencyLevel latency_level = LatencyLevel::BelowHalfSlo;
  CostLevel cost_level = CostLevel::BelowHalfBudget;
  bool cache_enabled = false;
  ReplicaBucket replica_bucket = ReplicaBucket::One;

  friend bool operator==(const DiscreteState&, const DiscreteState&) = default;
};

inline constexpr std::size_t kUtilBuckets = 5;
inline constexpr std::size_t kNumStates = 270;

constexpr ReplicaBucket replica_bucket_for(int replicas) {
  if (replicas <= 1) return ReplicaBucket::One;
  if (replicas <= 3) return ReplicaBucket::TwoToThree;
  return ReplicaBucket::FourPlus;
}

inline DiscreteState discretize(const SystemSnapshot& snap, const TargetsConfig& targets) {
  DiscreteState s;
  s.util_bucket = std::min(static_cast<int>(std::floor(snap.cpu_util * kUtilBuckets)), 4);
  s.util_bucket = std::max(s.util_bucket, 0);

  const double slo = targets.slo_latency_ms;
  if (snap.latency_ms < 0.5 * slo)
    s.latency_level = LatencyLevel::BelowHalfSlo;
  else if (snap.latency_ms <= slo)
    s.latency_level = LatencyLevel::WithinSlo;
  else
    s.latency_level = LatencyLevel::BreachingSlo;

  const double budget = targets.cost_budget;
  if (snap.total_cost < 0.5 * budget)
    s.cost_level = CostLevel::BelowHalfBudget;
  else if (snap.total_cost <= budget)
    s.cost_level = CostLevel::WithinBudget;
  else
    s.cost_level = CostLevel::OverBudget;

  s.cache_enabled = snap.cache_enabled;
  s.replica_bucket = replica_bucket_for(snap.replicas);
  return s;
}

/// Mixed-radix encoding, most significant first:
/// (util_bucket, latency_level, cost_level, cache_enabled, replica_bucket).
constexpr std::size_t state_index(const DiscreteState& s) {
  std::size_t idx = static_cast<std::size_t>(s.util_bucket);
  idx = idx * 3 + static_cast<std::size_t>(s.latency_level);
  idx = idx * 3 + static_cast<std::size_t>(s.cost_level);
  idx = idx * 2 + (s.cache_enabled ? 1 : 0);
  idx = idx * 3 + static_cast<std::size_t>(s.replica_bucket);
  return idx;
}

inline DiscreteState state_from_index(std::size_t idx) {
  if (idx >= kNumStates) throw Error(ErrorCode::IndexOutOfRange, "state index " + std::to_string(idx));
  DiscreteState s;
  s.replica_bucket = static_cast<ReplicaBucket>(idx % 3);
  idx /= 3;
  s.cache_enabled = (idx % 2) == 1;
  idx /= 2;
  s.cost_level = static_cast<CostLevel>(idx % 3);
  idx /= 3;
  s.latency_level = static_cast<LatencyLevel>(idx % 3);
  idx /= 3;
  s.util_bucket = static_cast<int>(idx);
  return s;
}

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

/// Ordinals are stable and used for tie-breaking.
enum class ActionKind {
  ScaleUpReplicas = 0,
  ScaleDownReplicas = 1,
  EnableCache = 2,
  DisableCache = 3,
  RebalanceWorkload = 4,
  OptimizeCode = 5,
  NoOp = 6,
};

inline constexpr std::size_t kNumActions = 7;

inline constexpr std::array<ActionKind, kNumActions> kAllActions = {
    ActionKind::ScaleUpReplicas,   ActionKind::ScaleDownReplicas, ActionKind::EnableCache, ActionKind::DisableCache,
    ActionKind::RebalanceWorkload, ActionKind::OptimizeCode,      ActionKind::NoOp,
};

constexpr std::size_t ordinal(ActionKind a) { return static_cast<std::size_t>(a); }

inline ActionKind action_from_ordinal(std::size_t ord) {
  if (ord >= kNumActions) throw Error(ErrorCode::IndexOutOfRange, "action ordinal " + std::to_string(ord));
  return static_cast<ActionKind>(ord);
}

constexpr std::string_view to_string(ActionKind a) {
  switch (a) {
    case ActionKind::ScaleUpReplicas: return "scale_up_replicas";
    case ActionKind::ScaleDownReplicas: return "scale_down_replicas";
    case ActionKind::EnableCache: return "enable_cache";
    case ActionKind::DisableCache: return "disable_cache";
    case ActionKind::RebalanceWorkload: return "rebalance_workload";
    case ActionKind::OptimizeCode: return "optimize_code";
    case ActionKind::NoOp: return "no_op";
  }
  return "";
}

/// CamelCase spelling, e.g. "ScaleUpReplicas".
constexpr std::string_view display_name(ActionKind a) {
  switch (a) {
    case ActionKind::ScaleUpReplicas: return "ScaleUpReplicas";
    case ActionKind::ScaleDownReplicas: return "ScaleDownReplicas";
    case ActionKind::EnableCache: return "EnableCache";
    case ActionKind::DisableCache: return "DisableCache";
    case ActionKind::RebalanceWorkload: return "RebalanceWorkload";
    case ActionKind::OptimizeCode: return "OptimizeCode";
    case ActionKind::NoOp: return "NoOp";
  }
  return "";
}

/// Accepts both the snake_case and the CamelCase spelling.
inline std::optional<ActionKind> action_from_string(std::string_view name) {
  for (auto a : kAllActions) {
    if (to_string(a) == name || display_name(a) == name) return a;
  }
  return std::nullopt;
}

inline ActionKind parse_action(std::string_view name) {
  auto a = action_from_string(name);
  if (!a) throw Error(ErrorCode::UnknownAction, "unknown action '" + std::string(name) + "'");
  return *a;
}

}  // namespace aiopt
