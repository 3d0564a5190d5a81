#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "aiopt/core_model.hpp"
#include "aiopt/error.hpp"
#include "aiopt/qlearning.hpp"
#include "aiopt/rng.hpp"
#include "aiopt/simenv.hpp"

namespace aiopt {

// ---------------------------------------------------------------------------
// Reward
// ---------------------------------------------------------------------------

struct RewardWeights {
  double w_cost = 1.0;
  double w_perf = 2.0;
  double w_effort = 0.1;
  double cost_ref = 1.0;  // replaced per episode by the first-step total cost
  double feedback_reward = 0.5;

  void validate() const {
    if (w_cost < 0 || w_perf < 0 || w_effort < 0) throw Error(ErrorCode::InvalidConfig, "reward weights must be >= 0");
    if (!(cost_ref > 0.0)) throw Error(ErrorCode::InvalidConfig, "cost_ref must be > 0");
    if (!(feedback_reward >= 0.0)) throw Error(ErrorCode::InvalidConfig, "feedback_reward must be >= 0");
  }
};

/// Per-step rewards are clipped to [-kRewardClip, kRewardClip] before learning.
inline constexpr double kRewardClip = 10.0;

constexpr bool carries_effort(ActionKind a) { return a == ActionKind::OptimizeCode || a == ActionKind::RebalanceWorkload; }

/// r = w_cost (prev - curr) / cost_ref - w_perf max(0, latency - slo) / slo - w_effort [effortful action]
inline double reward(double prev_cost, double curr_cost, double curr_latency_ms, double slo_ms, ActionKind action,
                     const RewardWeights& w) {
  const double savings = w.w_cost * (prev_cost - curr_cost) / w.cost_ref;
  const double breach = w.w_perf * std::max(0.0, curr_latency_ms - slo_ms) / slo_ms;
  const double effort = carries_effort(action) ? w.w_effort : 0.0;
  return savings - breach - effort;
}

// ---------------------------------------------------------------------------
// Simulator adapter for the tabular trainer
// ---------------------------------------------------------------------------

/// Seed sub-streams so training and evaluation never share episode seeds.
enum class SeedStream : std::uint64_t { Training = 1, Evaluation = 2, RandomPolicy = 3 };

/// Wraps the service simulator as a TabularEnvironment over the 270-state,
/// 7-action space. Episode k runs with a seed derived from (seed_base, stream, k).
/// Each step's savings are measured against the episode's reference cost
/// (its first-step total), so a sustained cost level keeps earning or
/// losing reward instead of telescoping to the net change over the episode.
class CostEnvironment {
 public:
  CostEnvironment(EnvConfig env, TargetsConfig targets, RewardWeights weights, std::uint64_t seed_base,
                  SeedStream stream)
      : base_(env), env_(env), targets_(targets), weights_(weights), seed_base_(seed_base), stream_(stream) {
    env.validate();
    targets.validate();
  }

  std::size_t num_states() const { return kNumStates; }
  std::size_t num_actions() const { return kNumActions; }
  std::size_t horizon() const { return static_cast<std::size_t>(env_.episode_length_steps); }

  std::size_t reset(std::uint64_t episode) {
    env_ = base_;
    env_.rng_seed = derive_seed(seed_base_, static_cast<std::uint64_t>(stream_), episode);
    noise_ = CounterStream(env_.rng_seed);
    state_ = aiopt::reset(env_, noise_);
    const auto first = observe_outcome(state_, env_);
    weights_.cost_ref = first.cost.total > 0.0 ? first.cost.total : 1.0;
    last_ = first;
    return state_index(discretize(first.snapshot, targets_));
  }

  Transition step(std::size_t action_ordinal) {
    const ActionKind action = action_from_ordinal(action_ordinal);
    last_ = aiopt::step(state_, action, env_, noise_);
    state_ = last_.env_state;
    const double r = reward(weights_.cost_ref, last_.cost.total, last_.snapshot.latency_ms, targets_.slo_latency_ms,
                            action, weights_);
    return Transition{r, state_index(discretize(last_.snapshot, targets_)), false};
  }

  const EnvState& state() const { return state_; }
  const StepOutcome& last_outcome() const { return last_; }
  const EnvConfig& episode_config() const { return env_; }
  const RewardWeights& episode_weights() const { return weights_; }

 private:
  EnvConfig base_;
  EnvConfig env_;
  TargetsConfig targets_;
  RewardWeights weights_;
  std::uint64_t seed_base_;
  SeedStream stream_;
  CounterStream noise_;
  EnvState state_;
  StepOutcome last_;
};

inline QTable make_cost_qtable() { return QTable(kNumStates, kNumActions); }

struct TrainingResult {
  QTable q;
  TrainingStats stats;
};

/// Trains a fresh table on the simulator. Deterministic for fixed seeds.
inline TrainingResult train(const EnvConfig& env_config, const TargetsConfig& targets, const AgentConfig& agent_config,
                            const RewardWeights& weights) {
  env_config.validate();
  targets.validate();
  agent_config.validate();
  CostEnvironment env(env_config, targets, weights, env_config.rng_seed, SeedStream::Training);
  TrainingResult result{make_cost_qtable(), {}};
  result.stats = train_tabular(env, result.q, agent_config, kRewardClip);
  return result;
}

// ---------------------------------------------------------------------------
// What-if simulation
// ---------------------------------------------------------------------------

struct WhatIfResult {
  double predicted_savings = 0.0;
  double effort_cost = 0.0;
  double roi = 0.0;
  std::vector<StepOutcome> trajectory;  // rollout starting with the evaluated action
};

constexpr double roi_of(double predicted_savings, double effort_cost) {
  return (predicted_savings - effort_cost) / (effort_cost + 1.0);
}

/// Compares `first_action` then NoOp x (H-1) against NoOp x H from the same
/// state and noise stream. Savings cover recurring cost only; the one-time
/// effort is reported separately and charged once through the ROI.
inline WhatIfResult simulate_whatif(const EnvState& origin, ActionKind first_action, const EnvConfig& env_config,
                                    int horizon) {
  if (horizon < 1) throw Error(ErrorCode::InvalidConfig, "horizon must be >= 1");
  EnvConfig cfg = env_config;
  cfg.episode_length_steps = origin.step + horizon;
  const CounterStream noise(cfg.rng_seed);

  WhatIfResult out;
  double cost_a = 0.0, cost_b = 0.0;
  EnvState a = origin, b = origin;
  for (int t = 0; t < horizon; ++t) {
    const auto oa = step(a, t == 0 ? first_action : ActionKind::NoOp, cfg, noise);
    const auto ob = step(b, ActionKind::NoOp, cfg, noise);
    if (t == 0 && first_action == ActionKind::OptimizeCode && !origin.code_optimized)
      out.effort_cost = cfg.code_opt_effort_cost;
    cost_a += oa.cost.total;
    cost_b += ob.cost.total;
    a = oa.env_state;
    b = ob.env_state;
    out.trajectory.push_back(oa);
  }
  out.predicted_savings = cost_b - (cost_a - out.effort_cost);
  out.roi = roi_of(out.predicted_savings, out.effort_cost);
  return out;
}

// ---------------------------------------------------------------------------
// Recommendations
// ---------------------------------------------------------------------------

struct Recommendation {
  std::string id;
  DiscreteState state;
  ActionKind action = ActionKind::NoOp;
  double q_value = 0.0;
  double predicted_savings = 0.0;
  double effort_cost = 0.0;
  double roi = 0.0;
  int rank = 1;

  friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

/// Unique recommendation ids: a per-process random prefix and a counter.
class IdSource {
 public:
  IdSource() : prefix_(make_prefix()) {}
  explicit IdSource(std::string prefix) : prefix_(std::move(prefix)) {}

  std::string next() { return prefix_ + "-" + std::to_string(counter_.fetch_add(1) + 1); }

 private:
  static std::string make_prefix() {
    std::random_device rd;
    static constexpr char kHex[] = "0123456789abcdef";
    std::string p = "rec-";
    for (int i = 0; i < 8; ++i) p.push_back(kHex[rd() % 16]);
    return p;
  }

  std::string prefix_;
  std::atomic<std::uint64_t> counter_{0};
};

/// Actions ordered by (Q descending, ordinal ascending).
inline std::vector<std::size_t> ranked_actions(const QTable& q, std::size_t s) {
  std::vector<std::size_t> order(q.actions());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto row = q.row(s);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return row[x] > row[y]; });
  return order;
}

inline constexpr int kDefaultHorizon = 12;

/// Top-k actions for `current`, each annotated by a what-if rollout from `origin`.
inline std::vector<Recommendation> recommend(const QTable& q, const DiscreteState& current, const EnvState& origin,
                                             int k, const EnvConfig& env_config, IdSource& ids,
                                             int horizon = kDefaultHorizon) {
  if (k < 1 || k > static_cast<int>(kNumActions))
    throw Error(ErrorCode::InvalidConfig, "k must lie in [1, " + std::to_string(kNumActions) + "]");
  if (q.states() != kNumStates || q.actions() != kNumActions)
    throw Error(ErrorCode::ShapeMismatch, "recommendations need a 270x7 table");
  const std::size_t s = state_index(current);
  const auto order = ranked_actions(q, s);
  std::vector<Recommendation> out;
  for (int r = 0; r < k; ++r) {
    const auto action = action_from_ordinal(order[static_cast<std::size_t>(r)]);
    const auto whatif = simulate_whatif(origin, action, env_config, horizon);
    out.push_back(Recommendation{ids.next(), current, action, q.value(s, ordinal(action)), whatif.predicted_savings,
                                 whatif.effort_cost, whatif.roi, r + 1});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Operator feedback
// ---------------------------------------------------------------------------

enum class Decision { Accept, Reject };

constexpr std::string_view to_string(Decision d) { return d == Decision::Accept ? "accept" : "reject"; }

struct FeedbackEvent {
  std::string recommendation_id;
  Decision decision = Decision::Accept;
  std::int64_t timestamp = 0;
};

/// Synthetic-reward backup at (issued.state, issued.action) with s' = s.
/// Returns the new Q-value.
inline double apply_feedback(QTable& q, const FeedbackEvent& event, const Recommendation& issued,
                             const RewardWeights& weights, const AgentConfig& agent_config) {
  if (event.recommendation_id != issued.id)
    throw Error(ErrorCode::UnknownRecommendation, "feedback for '" + event.recommendation_id +
                                                      "' does not reference recommendation '" + issued.id + "'");
  const double r = event.decision == Decision::Accept ? weights.feedback_reward : -weights.feedback_reward;
  const std::size_t s = state_index(issued.state);
  const std::size_t a = ordinal(issued.action);
  q_update(q, s, a, r, s, agent_config);
  return q.value(s, a);
}

/// Issued recommendations and their resolution status; each id resolves once.
class RecommendationBook {
 public:
  void issue(const std::vector<Recommendation>& recs) {
    for (const auto& r : recs) entries_[r.id] = Entry{r, false};
  }

  bool contains(const std::string& id) const { return entries_.count(id) > 0; }
  bool resolved(const std::string& id) const {
    auto it = entries_.find(id);
    return it != entries_.end() && it->second.resolved;
  }

  /// Marks the recommendation resolved and returns it.
  const Recommendation& resolve(const std::string& id) {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw Error(ErrorCode::UnknownRecommendation, "unknown recommendation '" + id + "'");
    if (it->second.resolved) throw Error(ErrorCode::AlreadyResolved, "recommendation '" + id + "' already resolved");
    it->second.resolved = true;
    return it->second.rec;
  }

  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    Recommendation rec;
    bool resolved = false;
  };
  std::map<std::string, Entry> entries_;
};

/// Resolves the event against the book and applies it. Throws
/// UnknownRecommendation or AlreadyResolved without touching the table.
inline double apply_feedback(QTable& q, const FeedbackEvent& event, RecommendationBook& book,
                             const RewardWeights& weights, const AgentConfig& agent_config) {
  const Recommendation& issued = book.resolve(event.recommendation_id);
  return apply_feedback(q, event, issued, weights, agent_config);
}

// ---------------------------------------------------------------------------
// Policies and evaluation
// ---------------------------------------------------------------------------

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual void begin_episode(std::uint64_t /*episode*/) {}
  virtual ActionKind choose(std::size_t state_idx) = 0;
};

class GreedyPolicy final : public Policy {
 public:
  explicit GreedyPolicy(const QTable& q) : q_(q) {}
  std::string name() const override { return "greedy"; }
  ActionKind choose(std::size_t s) override { return action_from_ordinal(q_.argmax(s)); }

 private:
  const QTable& q_;
};

class NoOpPolicy final : public Policy {
 public:
  std::string name() const override { return "no_op"; }
  ActionKind choose(std::size_t) override { return ActionKind::NoOp; }
};

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "random"; }
  void begin_episode(std::uint64_t episode) override {
    rng_ = CounterStream(derive_seed(seed_, static_cast<std::uint64_t>(SeedStream::RandomPolicy), episode));
  }
  ActionKind choose(std::size_t) override { return action_from_ordinal(rng_.next_below(kNumActions)); }

 private:
  std::uint64_t seed_;
  CounterStream rng_{0};
};

enum class BaselinePolicy { NoOp, Random };

struct PolicyStats {
  std::string policy;
  std::vector<double> episode_costs;
  std::vector<double> episode_rewards;
  double mean_total_cost = 0.0;
  double min_total_cost = 0.0;
  double max_total_cost = 0.0;
  double mean_total_reward = 0.0;
};

struct EvaluationComparison {
  PolicyStats learned;
  PolicyStats baseline;
};

struct EpisodeTrace {
  double total_cost = 0.0;
  double total_reward = 0.0;
  std::vector<StepOutcome> outcomes;
};

/// Plays one full episode of `policy` on the given episode index.
inline EpisodeTrace run_episode(CostEnvironment& env, Policy& policy, std::uint64_t episode) {
  EpisodeTrace trace;
  std::size_t s = env.reset(episode);
  policy.begin_episode(episode);
  for (std::size_t t = 0; t < env.horizon(); ++t) {
    const auto tr = env.step(ordinal(policy.choose(s)));
    trace.total_reward += std::clamp(tr.reward, -kRewardClip, kRewardClip);
    trace.total_cost += env.last_outcome().cost.total;
    trace.outcomes.push_back(env.last_outcome());
    s = tr.next_state;
  }
  return trace;
}

inline PolicyStats evaluate_policy(Policy& policy, const EnvConfig& env_config, const TargetsConfig& targets,
                                   const RewardWeights& weights, int episodes, std::uint64_t seed_base) {
  if (episodes < 1) throw Error(ErrorCode::InvalidConfig, "episodes must be >= 1");
  CostEnvironment env(env_config, targets, weights, seed_base, SeedStream::Evaluation);
  PolicyStats stats;
  stats.policy = policy.name();
  for (int e = 0; e < episodes; ++e) {
    const auto trace = run_episode(env, policy, static_cast<std::uint64_t>(e));
    stats.episode_costs.push_back(trace.total_cost);
    stats.episode_rewards.push_back(trace.total_reward);
  }
  const auto n = static_cast<double>(episodes);
  stats.mean_total_cost = std::accumulate(stats.episode_costs.begin(), stats.episode_costs.end(), 0.0) / n;
  stats.min_total_cost = *std::min_element(stats.episode_costs.begin(), stats.episode_costs.end());
  stats.max_total_cost = *std::max_element(stats.episode_costs.begin(), stats.episode_costs.end());
  stats.mean_total_reward = std::accumulate(stats.episode_rewards.begin(), stats.episode_rewards.end(), 0.0) / n;
  return stats;
}

/// Greedy play of `q` against a baseline on the identical episode seed set.
inline EvaluationComparison evaluate(const QTable& q, const EnvConfig& env_config, const TargetsConfig& targets,
                                     const RewardWeights& weights, int episodes, BaselinePolicy baseline,
                                     std::uint64_t seed_base) {
  GreedyPolicy greedy(q);
  EvaluationComparison out;
  out.learned = evaluate_policy(greedy, env_config, targets, weights, episodes, seed_base);
  if (baseline == BaselinePolicy::NoOp) {
    NoOpPolicy noop;
    out.baseline = evaluate_policy(noop, env_config, targets, weights, episodes, seed_base);
  } else {
    RandomPolicy random(seed_base);
    out.baseline = evaluate_policy(random, env_config, targets, weights, episodes, seed_base);
  }
  return out;
}

}  // namespace aiopt
