#pragma once

// End-to-end helpers shared by the CLI and the HTTP service: derive the
// current state from ingested metrics, run detection, and assemble reports.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "aiopt/core_model.hpp"
#include "aiopt/flawdet.hpp"
#include "aiopt/ingest.hpp"
#include "aiopt/json_io.hpp"
#include "aiopt/recommender.hpp"
#include "aiopt/reporting.hpp"
#include "aiopt/simenv.hpp"

namespace aiopt {

/// Current view derived from the most recent ingest window.
struct CurrentView {
  SystemSnapshot snapshot;
  DiscreteState state;
  EnvState env;  // what-if origin
};

inline std::optional<CurrentView> current_view(const std::vector<MetricSample>& samples, const AppConfig& config) {
  const auto window = latest_window(samples, config.window_ms);
  if (window.empty()) return std::nullopt;
  try {
    CurrentView v;
    v.snapshot = aggregate_snapshot(window, config.deployment);
    v.state = discretize(v.snapshot, config.targets);
    v.env.replicas = std::clamp(config.deployment.replicas, 1, config.env.max_replicas);
    v.env.cache_enabled = config.deployment.cache_enabled;
    v.env.current_load_rps = v.snapshot.throughput_rps;
    return v;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IncompleteWindow) return std::nullopt;
    throw;
  }
}

inline std::vector<Flaw> detect_in(const std::vector<MetricSample>& samples, const AppConfig& config) {
  const auto sorted = sorted_by_time(samples);
  return detect_flaws(sorted, config.detector, config.rules);
}

/// Report over ingested metrics, one outcome per complete window.
inline Report report_from_samples(const std::vector<MetricSample>& samples, const AppConfig& config,
                                  std::vector<Recommendation> recommendations, std::int64_t generated_at) {
  const auto windows = window_outcomes(samples, config.window_ms, config.deployment);
  std::vector<StepOutcome> outcomes;
  std::vector<std::int64_t> timestamps;
  for (const auto& w : windows) {
    outcomes.push_back(w.outcome);
    timestamps.push_back(w.last_ts);
  }
  return assemble_report(generated_at, outcomes, timestamps, config.targets, detect_in(samples, config),
                         std::move(recommendations));
}

/// Metric records equivalent to a simulated trajectory; step k is stamped
/// (k + 1) * window_ms.
inline std::vector<MetricSample> outcomes_to_samples(const std::vector<StepOutcome>& outcomes,
                                                     std::int64_t window_ms, const std::string& source = "sim") {
  std::vector<MetricSample> out;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    const auto ts = static_cast<std::int64_t>(k + 1) * window_ms;
    const auto& o = outcomes[k];
    auto add = [&](MetricName m, double v) { out.push_back({ts, source, m, v, std::string(default_unit(m))}); };
    add(MetricName::LatencyMs, o.snapshot.latency_ms);
    add(MetricName::ThroughputRps, o.snapshot.throughput_rps);
    add(MetricName::CpuUtil, o.snapshot.cpu_util);
    add(MetricName::CostInfra, o.cost.infrastructure);
    add(MetricName::CostLicense, o.cost.licensing);
    add(MetricName::CostMaintenance, o.cost.maintenance);
    add(MetricName::CostOps, o.cost.operational);
  }
  return out;
}

/// Report for one simulated evaluation episode of `policy`, with the NoOp
/// policy on the same seed as the savings baseline.
inline Report simulated_report(Policy& policy, const AppConfig& config, std::vector<Recommendation> recommendations,
                               std::int64_t generated_at, std::uint64_t episode = 0) {
  CostEnvironment env(config.env, config.targets, config.reward_weights, config.env.rng_seed, SeedStream::Evaluation);
  const auto trace = run_episode(env, policy, episode);
  NoOpPolicy noop;
  const auto base = run_episode(env, noop, episode);

  std::vector<std::int64_t> timestamps;
  for (std::size_t k = 0; k < trace.outcomes.size(); ++k)
    timestamps.push_back(static_cast<std::int64_t>(k + 1) * config.window_ms);
  const auto samples = outcomes_to_samples(trace.outcomes, config.window_ms);
  return assemble_report(generated_at, trace.outcomes, timestamps, config.targets, detect_in(samples, config),
                         std::move(recommendations), std::span<const StepOutcome>(base.outcomes));
}

}  // namespace aiopt
