#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aiopt/core_model.hpp"
#include "aiopt/csv.hpp"
#include "aiopt/error.hpp"
#include "aiopt/flawdet.hpp"
#include "aiopt/json_io.hpp"
#include "aiopt/recommender.hpp"
#include "aiopt/simenv.hpp"

namespace aiopt {

/// Step duration is one time unit, so requests served in a step equal its
/// throughput_rps numerically.
struct KpiSet {
  double mean_latency_ms = 0.0;
  double p95_latency_ms = 0.0;
  double mean_throughput_rps = 0.0;
  double mean_cpu_util = 0.0;
  double total_cost = 0.0;
  std::optional<double> cost_per_transaction;  // absent when no requests were served
  double slo_breach_fraction = 0.0;
  double cumulative_savings_vs_baseline = 0.0;  // progress proxy: baseline cost minus actual cost

  friend bool operator==(const KpiSet&, const KpiSet&) = default;
};

struct CostPoint {
  std::int64_t ts = 0;
  CostBreakdown cost;
  friend bool operator==(const CostPoint&, const CostPoint&) = default;
};

struct ReportWindow {
  std::int64_t start_ts = 0;
  std::int64_t end_ts = 0;
  friend bool operator==(const ReportWindow&, const ReportWindow&) = default;
};

struct Report {
  std::int64_t generated_at = 0;
  ReportWindow window;
  std::optional<KpiSet> kpis;  // absent when there is no data
  std::vector<Flaw> flaws;
  std::vector<Recommendation> recommendations;
  std::vector<CostPoint> cost_breakdown_series;

  friend bool operator==(const Report&, const Report&) = default;
};

inline KpiSet compute_kpis(std::span<const StepOutcome> outcomes, const TargetsConfig& targets,
                           std::optional<std::span<const StepOutcome>> baseline = std::nullopt) {
  if (outcomes.empty()) throw Error(ErrorCode::EmptySeries, "no outcomes to summarize");
  std::vector<double> latency, throughput, cpu, cost;
  std::size_t breaches = 0;
  for (const auto& o : outcomes) {
    latency.push_back(o.snapshot.latency_ms);
    throughput.push_back(o.snapshot.throughput_rps);
    cpu.push_back(o.snapshot.cpu_util);
    cost.push_back(o.cost.total);
    if (o.snapshot.latency_ms > targets.slo_latency_ms) ++breaches;
  }
  const auto n = static_cast<double>(outcomes.size());
  auto sum = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  };

  KpiSet k;
  k.mean_latency_ms = sum(latency) / n;
  k.p95_latency_ms = percentile_nearest_rank(latency, 95.0);
  k.mean_throughput_rps = sum(throughput) / n;
  k.mean_cpu_util = sum(cpu) / n;
  k.total_cost = sum(cost);
  const double total_requests = sum(throughput);
  if (total_requests > 0.0) k.cost_per_transaction = k.total_cost / total_requests;
  k.slo_breach_fraction = static_cast<double>(breaches) / n;
  if (baseline) {
    double base = 0.0;
    for (const auto& o : *baseline) base += o.cost.total;
    k.cumulative_savings_vs_baseline = base - k.total_cost;
  }
  return k;
}

// ---------------------------------------------------------------------------
// Ingested metrics -> per-window outcomes
// ---------------------------------------------------------------------------

struct WindowOutcome {
  std::int64_t window_start = 0;
  std::int64_t last_ts = 0;
  StepOutcome outcome;
};

inline CostBreakdown cost_breakdown_of(std::span<const MetricSample> window) {
  CostBreakdown c;
  for (const auto& [m, v] : latest_costs(window)) {
    switch (m) {
      case MetricName::CostInfra: c.infrastructure = v; break;
      case MetricName::CostLicense: c.licensing = v; break;
      case MetricName::CostMaintenance: c.maintenance = v; break;
      case MetricName::CostOps: c.operational = v; break;
      default: break;
    }
  }
  c.total = c.infrastructure + c.licensing + c.maintenance + c.operational;
  return c;
}

/// Groups samples into fixed windows of `window_ms` (aligned to multiples of
/// window_ms) and aggregates each complete window. Incomplete windows are skipped.
inline std::vector<WindowOutcome> window_outcomes(std::span<const MetricSample> samples, std::int64_t window_ms,
                                                  const Deployment& deployment) {
  std::map<std::int64_t, std::vector<MetricSample>> windows;
  for (const auto& s : samples) windows[s.timestamp / window_ms].push_back(s);
  std::vector<WindowOutcome> out;
  for (const auto& [key, group] : windows) {
    try {
      const auto snap = aggregate_snapshot(group, deployment);
      const auto cost = cost_breakdown_of(group);
      EnvState env;
      env.replicas = deployment.replicas;
      env.cache_enabled = deployment.cache_enabled;
      env.current_load_rps = snap.throughput_rps;
      std::int64_t last = 0;
      for (const auto& s : group) last = std::max(last, s.timestamp);
      out.push_back(WindowOutcome{key * window_ms, last, StepOutcome{snap, cost, env}});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::IncompleteWindow) throw;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline ojson to_json(const KpiSet& k) {
  ojson j;
  j["mean_latency_ms"] = k.mean_latency_ms;
  j["p95_latency_ms"] = k.p95_latency_ms;
  j["mean_throughput_rps"] = k.mean_throughput_rps;
  j["mean_cpu_util"] = k.mean_cpu_util;
  j["total_cost"] = k.total_cost;
  j["cost_per_transaction"] = k.cost_per_transaction ? ojson(*k.cost_per_transaction) : ojson(nullptr);
  j["slo_breach_fraction"] = k.slo_breach_fraction;
  j["cumulative_savings_vs_baseline"] = k.cumulative_savings_vs_baseline;
  return j;
}

inline KpiSet kpis_from_json(const nlohmann::json& j) {
  KpiSet k;
  k.mean_latency_ms = j.at("mean_latency_ms").get<double>();
  k.p95_latency_ms = j.at("p95_latency_ms").get<double>();
  k.mean_throughput_rps = j.at("mean_throughput_rps").get<double>();
  k.mean_cpu_util = j.at("mean_cpu_util").get<double>();
  k.total_cost = j.at("total_cost").get<double>();
  if (!j.at("cost_per_transaction").is_null()) k.cost_per_transaction = j.at("cost_per_transaction").get<double>();
  k.slo_breach_fraction = j.at("slo_breach_fraction").get<double>();
  k.cumulative_savings_vs_baseline = j.at("cumulative_savings_vs_baseline").get<double>();
  return k;
}

inline ojson to_json(const Report& r) {
  ojson j;
  j["generated_at"] = r.generated_at;
  j["window"] = {{"start_ts", r.window.start_ts}, {"end_ts", r.window.end_ts}};
  j["kpis"] = r.kpis ? to_json(*r.kpis) : ojson(nullptr);
  j["flaws"] = ojson::array();
  for (const auto& f : r.flaws) j["flaws"].push_back(to_json(f));
  j["recommendations"] = ojson::array();
  for (const auto& rec : r.recommendations) j["recommendations"].push_back(to_json(rec));
  j["cost_breakdown_series"] = ojson::array();
  for (const auto& p : r.cost_breakdown_series) {
    ojson e;
    e["ts"] = p.ts;
    const ojson cost = to_json(p.cost);
    for (const auto& [k, v] : cost.items()) e[k] = v;
    j["cost_breakdown_series"].push_back(e);
  }
  return j;
}

inline Report report_from_json(const nlohmann::json& j) {
  try {
    Report r;
    r.generated_at = j.at("generated_at").get<std::int64_t>();
    r.window = {j.at("window").at("start_ts").get<std::int64_t>(), j.at("window").at("end_ts").get<std::int64_t>()};
    if (!j.at("kpis").is_null()) r.kpis = kpis_from_json(j.at("kpis"));
    for (const auto& f : j.at("flaws")) r.flaws.push_back(flaw_from_json(f));
    for (const auto& rec : j.at("recommendations")) r.recommendations.push_back(recommendation_from_json(rec));
    for (const auto& p : j.at("cost_breakdown_series"))
      r.cost_breakdown_series.push_back(CostPoint{p.at("ts").get<std::int64_t>(), cost_breakdown_from_json(p)});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("report document: ") + e.what());
  }
}

inline Report import_report_json(std::string_view text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::MalformedRecord, "report is not valid JSON");
  return report_from_json(j);
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

enum class ExportFormat { Json, Csv };

inline ExportFormat parse_export_format(std::string_view s) {
  if (s == "json") return ExportFormat::Json;
  if (s == "csv") return ExportFormat::Csv;
  throw Error(ErrorCode::UnsupportedFormat, "unsupported format '" + std::string(s) + "'");
}


/// Sectioned CSV: `# kpis`, `# flaws`, `# recommendations`, `# cost_series`,
/// each followed by a header row and zero or more data rows.
inline std::string export_csv(const Report& r) {
  using std::string;
  std::string out;
  out += "# kpis\r\n";
  out += csv::row(std::vector<string>{"mean_latency_ms", "p95_latency_ms", "mean_throughput_rps", "mean_cpu_util",
                                      "total_cost", "cost_per_transaction", "slo_breach_fraction",
                                      "cumulative_savings_vs_baseline"});
  if (r.kpis) {
    const auto& k = *r.kpis;
    out += csv::row(std::vector<string>{
        csv::number(k.mean_latency_ms), csv::number(k.p95_latency_ms), csv::number(k.mean_throughput_rps),
        csv::number(k.mean_cpu_util), csv::number(k.total_cost),
        k.cost_per_transaction ? csv::number(*k.cost_per_transaction) : string(), csv::number(k.slo_breach_fraction),
        csv::number(k.cumulative_savings_vs_baseline)});
  }

  out += "# flaws\r\n";
  out += csv::row(std::vector<string>{"rule_or_detector", "metric", "first_ts", "last_ts", "observed", "expected",
                                      "severity", "suggested_action"});
  for (const auto& f : r.flaws) {
    out += csv::row(std::vector<string>{
        csv::field(f.rule_or_detector), string(to_string(f.metric)), std::to_string(f.first_ts),
        std::to_string(f.last_ts), csv::number(f.observed), csv::field(f.expected), string(to_string(f.severity)),
        f.suggested_action ? string(to_string(*f.suggested_action)) : string()});
  }

  out += "# recommendations\r\n";
  out += csv::row(std::vector<string>{"id", "rank", "action", "q_value", "predicted_savings", "effort_cost", "roi",
                                      "util_bucket", "latency_level", "cost_level", "cache_enabled",
                                      "replica_bucket"});
  for (const auto& rec : r.recommendations) {
    out += csv::row(std::vector<string>{
        csv::field(rec.id), std::to_string(rec.rank), string(to_string(rec.action)), csv::number(rec.q_value),
        csv::number(rec.predicted_savings), csv::number(rec.effort_cost), csv::number(rec.roi),
        std::to_string(rec.state.util_bucket), string(to_string(rec.state.latency_level)),
        string(to_string(rec.state.cost_level)), rec.state.cache_enabled ? "true" : "false",
        string(to_string(rec.state.replica_bucket))});
  }

  out += "# cost_series\r\n";
  out += csv::row(
      std::vector<string>{"ts", "infrastructure", "licensing", "maintenance", "operational", "total"});
  for (const auto& p : r.cost_breakdown_series) {
    out += csv::row(std::vector<string>{std::to_string(p.ts), csv::number(p.cost.infrastructure),
                                        csv::number(p.cost.licensing), csv::number(p.cost.maintenance),
                                        csv::number(p.cost.operational), csv::number(p.cost.total)});
  }
  return out;
}

inline std::string export_report(const Report& report, ExportFormat format) {
  switch (format) {
    case ExportFormat::Json: return to_json(report).dump(2) + "\n";
    case ExportFormat::Csv: return export_csv(report);
  }
  throw Error(ErrorCode::UnsupportedFormat, "unsupported export format");
}

inline std::string export_report(const Report& report, std::string_view format) {
  return export_report(report, parse_export_format(format));
}

/// Builds a report from time-ordered outcomes with their timestamps.
inline Report assemble_report(std::int64_t generated_at, std::span<const StepOutcome> outcomes,
                              std::span<const std::int64_t> timestamps, const TargetsConfig& targets,
                              std::vector<Flaw> flaws, std::vector<Recommendation> recommendations,
                              std::optional<std::span<const StepOutcome>> baseline = std::nullopt) {
  if (outcomes.size() != timestamps.size())
    throw Error(ErrorCode::InvalidConfig, "one timestamp per outcome is required");
  Report r;
  r.generated_at = generated_at;
  r.flaws = std::move(flaws);
  r.recommendations = std::move(recommendations);
  if (!outcomes.empty()) {
    r.kpis = compute_kpis(outcomes, targets, baseline);
    r.window = {timestamps.front(), timestamps.back()};
    for (std::size_t i = 0; i < outcomes.size(); ++i) r.cost_breakdown_series.push_back({timestamps[i], outcomes[i].cost});
  }
  if (outcomes.empty() && !r.flaws.empty()) r.window = {r.flaws.front().first_ts, r.flaws.front().last_ts};
  for (const auto& f : r.flaws) {
    r.window.start_ts = std::min(r.window.start_ts, f.first_ts);
    r.window.end_ts = std::max(r.window.end_ts, f.last_ts);
  }
  return r;
}

}  // namespace aiopt
