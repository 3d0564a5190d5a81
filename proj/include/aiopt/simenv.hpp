#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

#include "aiopt/core_model.hpp"
#include "aiopt/error.hpp"
#include "aiopt/rng.hpp"

namespace aiopt {

/// Parameters of the simulated replicated service. Defaults form the
/// reference scenario "baseline-v1".
struct EnvConfig {
  double base_service_time_s = 0.05;
  int max_replicas = 8;
  double replica_price = 10.0;
  double cache_price = 5.0;
  double license_price = 2.0;
  double ops_price = 3.0;
  double maintenance_base = 1.0;
  double code_opt_effort_cost = 50.0;
  double cache_hit_rate = 0.5;
  double code_opt_speedup = 0.2;
  double imbalance_drift_per_step = 0.05;
  double load_mean_rps = 30.0;
  double load_amplitude_rps = 15.0;
  double load_noise_rps = 2.0;
  int episode_length_steps = 48;
  std::uint64_t rng_seed = 0;

  void validate() const {
    auto fail = [](const char* what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (!(base_service_time_s > 0.0)) fail("base_service_time_s must be > 0");
    if (max_replicas < 1) fail("max_replicas must be >= 1");
    if (replica_price < 0 || cache_price < 0 || license_price < 0 || ops_price < 0 || maintenance_base < 0 ||
        code_opt_effort_cost < 0)
      fail("prices must be >= 0");
    if (!(cache_hit_rate >= 0.0 && cache_hit_rate < 1.0)) fail("cache_hit_rate must lie in [0, 1)");
    if (!(code_opt_speedup >= 0.0 && code_opt_speedup < 1.0)) fail("code_opt_speedup must lie in [0, 1)");
    if (imbalance_drift_per_step < 0) fail("imbalance_drift_per_step must be >= 0");
    if (!(load_mean_rps > 0.0)) fail("load_mean_rps must be > 0");
    if (load_amplitude_rps < 0 || load_amplitude_rps > load_mean_rps)
      fail("load_amplitude_rps must lie in [0, load_mean_rps]");
    if (load_noise_rps < 0) fail("load_noise_rps must be >= 0");
    if (episode_length_steps < 1) fail("episode_length_steps must be >= 1");
  }
};

struct EnvState {
  int step = 0;
  int replicas = 2;
  bool cache_enabled = false;
  bool code_optimized = false;
  double imbalance = 1.0;  // [1, 2]
  double current_load_rps = 0.0;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct CostBreakdown {
  double infrastructure = 0.0;
  double licensing = 0.0;
  double maintenance = 0.0;
  double operational = 0.0;
  double total = 0.0;

  friend bool operator==(const CostBreakdown&, const CostBreakdown&) = default;
};

struct StepOutcome {
  SystemSnapshot snapshot;
  CostBreakdown cost;
  EnvState env_state;

  friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

inline constexpr double kMaxUtilization = 0.99;
inline constexpr int kLoadPeriodSteps = 24;

/// Diurnal sinusoid plus uniform noise; noise for step k is draw k of the stream.
inline double load_at(const EnvConfig& config, int step, const CounterStream& noise) {
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(step) / kLoadPeriodSteps;
  double load = config.load_mean_rps + config.load_amplitude_rps * std::sin(phase);
  if (config.load_noise_rps > 0.0) {
    const double u = noise.uniform_at(static_cast<std::uint64_t>(step));
    load += config.load_noise_rps * (2.0 * u - 1.0);
  }
  return std::max(0.0, load);
}

inline double load_at(const EnvConfig& config, int step) { return load_at(config, step, CounterStream(config.rng_seed)); }

struct UtilizationLatency {
  double rho = 0.0;
  double latency_ms = 0.0;
};

inline double effective_service_time(const EnvState& state, const EnvConfig& config) {
  return config.base_service_time_s * (state.code_optimized ? 1.0 - config.code_opt_speedup : 1.0);
}

/// M/M/1-style closure: latency = s_eff / (1 - rho), rho capped at 0.99.
inline UtilizationLatency utilization_and_latency(const EnvState& state, const EnvConfig& config) {
  const double s_eff = effective_service_time(state, config);
  const double load = state.current_load_rps * (state.cache_enabled ? 1.0 - config.cache_hit_rate : 1.0);
  const double rho = std::clamp(state.imbalance * load * s_eff / state.replicas, 0.0, kMaxUtilization);
  return {rho, 1000.0 * s_eff / (1.0 - rho)};
}

inline CostBreakdown cost_of(const EnvState& state, const EnvConfig& config, double one_time_effort = 0.0) {
  CostBreakdown c;
  c.infrastructure = state.replicas * config.replica_price + (state.cache_enabled ? config.cache_price : 0.0);
  c.licensing = config.license_price;
  c.maintenance = config.maintenance_base + one_time_effort;
  c.operational = config.ops_price;
  c.total = c.infrastructure + c.licensing + c.maintenance + c.operational;
  return c;
}

inline SystemSnapshot observe(const EnvState& state, const EnvConfig& config, const CostBreakdown& cost) {
  const auto [rho, latency] = utilization_and_latency(state, config);
  return SystemSnapshot{rho, latency, state.current_load_rps, cost.total, state.cache_enabled, state.replicas};
}

inline EnvState reset(const EnvConfig& config, const CounterStream& noise) {
  EnvState s;
  s.step = 0;
  s.replicas = std::min(2, config.max_replicas);
  s.cache_enabled = false;
  s.code_optimized = false;
  s.imbalance = 1.0;
  s.current_load_rps = load_at(config, 0, noise);
  return s;
}

inline EnvState reset(const EnvConfig& config) { return reset(config, CounterStream(config.rng_seed)); }

/// Outcome of observing a state without acting (used for an episode's first step).
inline StepOutcome observe_outcome(const EnvState& state, const EnvConfig& config) {
  const auto cost = cost_of(state, config);
  return StepOutcome{observe(state, config, cost), cost, state};
}

/// Applies an action, drifts imbalance, advances the workload by one step.
inline StepOutcome step(const EnvState& state, ActionKind action, const EnvConfig& config, const CounterStream& noise) {
  if (state.step >= config.episode_length_steps)
    throw Error(ErrorCode::EpisodeExhausted, "episode of " + std::to_string(config.episode_length_steps) +
                                                 " steps already complete");
  EnvState next = state;
  double effort = 0.0;
  switch (action) {
    case ActionKind::ScaleUpReplicas: next.replicas = std::min(next.replicas + 1, config.max_replicas); break;
    case ActionKind::ScaleDownReplicas: next.replicas = std::max(next.replicas - 1, 1); break;
    case ActionKind::EnableCache: next.cache_enabled = true; break;
    case ActionKind::DisableCache: next.cache_enabled = false; break;
    case ActionKind::RebalanceWorkload: next.imbalance = 1.0; break;
    case ActionKind::OptimizeCode:
      if (!next.code_optimized) effort = config.code_opt_effort_cost;
      next.code_optimized = true;
      break;
    case ActionKind::NoOp: break;
  }
  next.imbalance = std::min(2.0, next.imbalance + config.imbalance_drift_per_step);
  next.step = state.step + 1;
  next.current_load_rps = load_at(config, next.step, noise);

  const auto cost = cost_of(next, config, effort);
  return StepOutcome{observe(next, config, cost), cost, next};
}

inline StepOutcome step(const EnvState& state, ActionKind action, const EnvConfig& config) {
  return step(state, action, config, CounterStream(config.rng_seed));
}

}  // namespace aiopt
