#pragma once

// Generic tabular Q-learning: value table, update rule, epsilon-greedy
// selection, and an episode-driven trainer over any environment that
// satisfies TabularEnvironment.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aiopt/error.hpp"
#include "aiopt/rng.hpp"

namespace aiopt {

enum class LearningRateSchedule {
  Constant,           // eta = learning_rate
  InverseVisitCount,  // eta = 1 / n(s,a), n counted including the current update
};

struct AgentConfig {
  double learning_rate = 0.1;
  double discount = 0.9;
  double epsilon_start = 0.3;
  double epsilon_decay = 0.995;
  double epsilon_min = 0.01;
  int episodes = 500;
  std::uint64_t rng_seed = 0;
  LearningRateSchedule schedule = LearningRateSchedule::Constant;

  void validate() const {
    auto fail = [](const char* what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) fail("learning_rate must lie in (0, 1]");
    if (!(discount >= 0.0 && discount < 1.0)) fail("discount must lie in [0, 1)");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0)) fail("epsilon_start must lie in [0, 1]");
    if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) fail("epsilon_decay must lie in (0, 1]");
    if (!(epsilon_min >= 0.0 && epsilon_min <= epsilon_start)) fail("epsilon_min must lie in [0, epsilon_start]");
    if (episodes < 1) fail("episodes must be >= 1");
  }
};

/// Dense states x actions table of Q-values plus visit counts, row-major.
class QTable {
 public:
  QTable() = default;
  QTable(std::size_t states, std::size_t actions)
      : states_(states), actions_(actions), q_(states * actions, 0.0), visits_(states * actions, 0) {}

  std::size_t states() const { return states_; }
  std::size_t actions() const { return actions_; }

  double value(std::size_t s, std::size_t a) const { return q_[offset(s, a)]; }
  void set_value(std::size_t s, std::size_t a, double v) { q_[offset(s, a)] = v; }
  std::uint64_t visits(std::size_t s, std::size_t a) const { return visits_[offset(s, a)]; }
  void set_visits(std::size_t s, std::size_t a, std::uint64_t n) { visits_[offset(s, a)] = n; }

  std::span<const double> row(std::size_t s) const {
    check(s, 0);
    return {q_.data() + s * actions_, actions_};
  }

  std::span<const double> values() const { return q_; }
  std::span<const std::uint64_t> visit_counts() const { return visits_; }

  double max_value(std::size_t s) const {
    auto r = row(s);
    return *std::max_element(r.begin(), r.end());
  }

  /// Blends `target` into Q(s,a) with weight `eta` and counts the visit.
  void blend(std::size_t s, std::size_t a, double target, double eta) {
    const std::size_t i = offset(s, a);
    q_[i] = (1.0 - eta) * q_[i] + eta * target;
    ++visits_[i];
  }

  /// Greedy action; ties go to the lowest ordinal.
  std::size_t argmax(std::size_t s) const {
    auto r = row(s);
    std::size_t best = 0;
    for (std::size_t a = 1; a < r.size(); ++a)
      if (r[a] > r[best]) best = a;
    return best;
  }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  void check(std::size_t s, std::size_t a) const {
    if (s >= states_ || a >= actions_)
      throw Error(ErrorCode::IndexOutOfRange, "(" + std::to_string(s) + ", " + std::to_string(a) +
                                                  ") outside table of shape " + std::to_string(states_) + "x" +
                                                  std::to_string(actions_));
  }
  std::size_t offset(std::size_t s, std::size_t a) const {
    check(s, a);
    return s * actions_ + a;
  }

  std::size_t states_ = 0;
  std::size_t actions_ = 0;
  std::vector<double> q_;
  std::vector<std::uint64_t> visits_;
};

inline double step_size(const QTable& q, std::size_t s, std::size_t a, const AgentConfig& config) {
  if (config.schedule == LearningRateSchedule::InverseVisitCount)
    return 1.0 / static_cast<double>(q.visits(s, a) + 1);
  return config.learning_rate;
}

/// One-step Q-learning backup:
///   Q(s,a) <- (1 - eta) Q(s,a) + eta (r + gamma max_a' Q(s',a'))
/// Terminal transitions back up r alone. Only (s, a) and its visit count change.
inline void q_update(QTable& q, std::size_t s, std::size_t a, double r, std::size_t s_next, const AgentConfig& config,
                     bool terminal = false) {
  const double bootstrap = terminal ? 0.0 : q.max_value(s_next);
  const double eta = step_size(q, s, a, config);
  q.blend(s, a, r + config.discount * bootstrap, eta);
}

/// Epsilon-greedy: one uniform draw decides exploration, a second picks the
/// random action. Greedy ties resolve to the lowest ordinal.
inline std::size_t select_action(const QTable& q, std::size_t s, double epsilon, CounterStream& rng) {
  if (rng.next_uniform() < epsilon) return static_cast<std::size_t>(rng.next_below(q.actions()));
  return q.argmax(s);
}

struct Transition {
  double reward = 0.0;
  std::size_t next_state = 0;
  bool terminal = false;
};

/// Environment contract used by the trainer. `reset(episode)` starts the
/// numbered episode and returns its initial state; `horizon()` caps the steps.
template <class Env>
concept TabularEnvironment = requires(Env& env, std::size_t action, std::uint64_t episode) {
  { env.num_states() } -> std::convertible_to<std::size_t>;
  { env.num_actions() } -> std::convertible_to<std::size_t>;
  { env.horizon() } -> std::convertible_to<std::size_t>;
  { env.reset(episode) } -> std::convertible_to<std::size_t>;
  { env.step(action) } -> std::same_as<Transition>;
};

struct TrainingStats {
  std::vector<double> episode_rewards;
  double final_epsilon = 0.0;
};

/// Runs `config.episodes` episodes against `env`, updating `q` in place.
/// Rewards are clipped to [-reward_clip, reward_clip] before each backup.
template <TabularEnvironment Env>
TrainingStats train_tabular(Env& env, QTable& q, const AgentConfig& config, double reward_clip) {
  config.validate();
  if (q.states() != env.num_states() || q.actions() != env.num_actions())
    throw Error(ErrorCode::ShapeMismatch, "Q-table shape does not match environment");

  CounterStream rng(config.rng_seed);
  TrainingStats stats;
  stats.episode_rewards.reserve(static_cast<std::size_t>(config.episodes));
  double epsilon = config.epsilon_start;
  for (int episode = 0; episode < config.episodes; ++episode) {
    std::size_t s = env.reset(static_cast<std::uint64_t>(episode));
    double total = 0.0;
    for (std::size_t t = 0; t < env.horizon(); ++t) {
      const std::size_t a = select_action(q, s, epsilon, rng);
      const Transition tr = env.step(a);
      const double r = std::clamp(tr.reward, -reward_clip, reward_clip);
      q_update(q, s, a, r, tr.next_state, config, tr.terminal);
      total += r;
      s = tr.next_state;
      if (tr.terminal) break;
    }
    stats.episode_rewards.push_back(total);
    epsilon = std::max(config.epsilon_min, epsilon * config.epsilon_decay);
  }
  stats.final_epsilon = epsilon;
  return stats;
}

}  // namespace aiopt
