#include <chrono>
#include <cmath>

#include <gtest/gtest.h>

#include "aiopt/qlearning.hpp"
#include "oracle/value_iteration.hpp"
#include "support/mdp_env.hpp"

using namespace aiopt;

namespace {

AgentConfig cfg(double eta, double gamma) {
  AgentConfig c;
  c.learning_rate = eta;
  c.discount = gamma;
  return c;
}

AgentConfig uniform_exploration(int episodes, double gamma) {
  AgentConfig c;
  c.discount = gamma;
  c.epsilon_start = c.epsilon_decay = c.epsilon_min = 1.0;
  c.episodes = episodes;
  c.schedule = LearningRateSchedule::InverseVisitCount;
  c.rng_seed = 7;
  return c;
}

double max_error(const QTable& q, const oracle::Solution& sol) {
  double err = 0;
  for (std::size_t s = 0; s < q.states(); ++s)
    for (std::size_t a = 0; a < q.actions(); ++a) err = std::max(err, std::abs(q.value(s, a) - sol.q[s][a]));
  return err;
}

}  // namespace

TEST(QUpdate, Examples) {
  QTable q(4, 7);
  q_update(q, 0, 0, 1.0, 1, cfg(0.1, 0.9));
  EXPECT_DOUBLE_EQ(q.value(0, 0), 0.1);
  EXPECT_EQ(q.visits(0, 0), 1u);

  QTable q2(4, 7);
  q2.set_value(2, 3, 0.7);
  q_update(q2, 1, 1, -2.5, 2, cfg(1.0, 0.0));
  EXPECT_EQ(q2.value(1, 1), -2.5);

  QTable q3(4, 7);
  q3.set_value(0, 0, 0.5);
  q3.set_value(1, 4, 1.0);
  q_update(q3, 0, 0, 0.0, 1, cfg(0.1, 0.9));
  EXPECT_NEAR(q3.value(0, 0), 0.54, 1e-15);
}

TEST(QUpdate, FrameCheck) {
  QTable q(6, 7);
  CounterStream r(1);
  for (std::size_t s = 0; s < 6; ++s)
    for (std::size_t a = 0; a < 7; ++a) q.set_value(s, a, r.next_uniform());
  for (int trial = 0; trial < 200; ++trial) {
    const QTable before = q;
    const std::size_t s = r.next_below(6), a = r.next_below(7), sn = r.next_below(6);
    q_update(q, s, a, r.next_uniform() - 0.5, sn, cfg(0.3, 0.9));
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 7; ++j) {
        if (i == s && j == a) {
          EXPECT_EQ(q.visits(i, j), before.visits(i, j) + 1);
          continue;
        }
        EXPECT_EQ(q.value(i, j), before.value(i, j));
        EXPECT_EQ(q.visits(i, j), before.visits(i, j));
      }
  }
}

TEST(QUpdate, IndexOutOfRange) {
  QTable q(3, 2);
  EXPECT_THROW(q_update(q, 3, 0, 0, 0, cfg(0.1, 0.9)), Error);
  EXPECT_THROW(q_update(q, 0, 2, 0, 0, cfg(0.1, 0.9)), Error);
  EXPECT_THROW(q_update(q, 0, 0, 0, 5, cfg(0.1, 0.9)), Error);
}

TEST(SelectAction, GreedyAndTies) {
  QTable q(1, 7);
  CounterStream r(0);
  EXPECT_EQ(select_action(q, 0, 0.0, r), 0u);
  q.set_value(0, 2, 0.9);
  EXPECT_EQ(select_action(q, 0, 0.0, r), 2u);
}

TEST(SelectAction, ArgmaxInvariantUnderShiftAndScale) {
  CounterStream r(4);
  for (int trial = 0; trial < 500; ++trial) {
    QTable q(1, 7), shifted(1, 7), scaled(1, 7);
    const double c = (r.next_uniform() - 0.5) * 100, k = 0.01 + r.next_uniform() * 50;
    for (std::size_t a = 0; a < 7; ++a) {
      // Values on a coarse grid produce frequent ties.
      const double v = static_cast<double>(r.next_below(4));
      q.set_value(0, a, v);
      shifted.set_value(0, a, v + c);
      scaled.set_value(0, a, v * k);
    }
    CounterStream g(0);
    const auto base = select_action(q, 0, 0.0, g);
    EXPECT_EQ(select_action(shifted, 0, 0.0, g), base);
    EXPECT_EQ(select_action(scaled, 0, 0.0, g), base);
  }
}

TEST(SelectAction, UniformExplorationWithinBinomialBound) {
  QTable q(1, 7);
  q.set_value(0, 3, 5.0);
  CounterStream r(2024);
  constexpr int kDraws = 200'000;
  std::array<int, 7> counts{};
  for (int i = 0; i < kDraws; ++i) ++counts[select_action(q, 0, 1.0, r)];
  const double p = 1.0 / 7.0;
  const double sigma = std::sqrt(kDraws * p * (1 - p));
  for (int c : counts) EXPECT_LE(std::abs(c - kDraws * p), 3 * sigma);
}

TEST(SelectAction, DeterministicForSeedAndDrawIndex) {
  QTable q(1, 7);
  CounterStream a(9), b(9);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(select_action(q, 0, 0.5, a), select_action(q, 0, 0.5, b));
}

TEST(Oracle, DagMatchesHandSolution) {
  const auto sol = oracle::value_iteration(oracle::three_state_dag(), 0.9);
  EXPECT_NEAR(sol.q[2][0], 1.0, 1e-15);
  EXPECT_NEAR(sol.q[2][1], 0.4, 1e-15);
  EXPECT_NEAR(sol.q[1][0], 1.1, 1e-15);
  EXPECT_NEAR(sol.q[1][1], 0.5, 1e-15);
  EXPECT_NEAR(sol.q[0][0], 0.99, 1e-15);
  EXPECT_NEAR(sol.q[0][1], 1.2, 1e-15);
  EXPECT_EQ(sol.policy, (std::vector<std::size_t>{1, 0, 0}));
}

TEST(Training, DagConvergesToOracle) {
  const auto mdp = oracle::three_state_dag();
  const auto sol = oracle::value_iteration(mdp, 0.9);
  testsupport::MdpEnvironment env(mdp, 10);
  QTable q(3, 2);
  train_tabular(env, q, uniform_exploration(300'000, 0.9), 10.0);
  EXPECT_LT(max_error(q, sol), 1e-4);
  for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(q.argmax(s), sol.policy[s]);
}

TEST(Training, CyclicMdpRecoversPolicy) {
  const auto mdp = oracle::three_state_cycle();
  const auto sol = oracle::value_iteration(mdp, 0.5);
  testsupport::MdpEnvironment env(mdp, 20);
  QTable q(3, 2);
  auto c = uniform_exploration(20'000, 0.5);
  c.schedule = LearningRateSchedule::Constant;
  c.learning_rate = 0.05;
  train_tabular(env, q, c, 10.0);
  EXPECT_LT(max_error(q, sol), 0.05);
  for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(q.argmax(s), sol.policy[s]);
}

TEST(Training, EpsilonScheduleAndStats) {
  testsupport::MdpEnvironment env(oracle::three_state_dag(), 10);
  QTable q(3, 2);
  AgentConfig c;
  c.episodes = 3;
  c.epsilon_start = 0.5;
  c.epsilon_decay = 0.5;
  c.epsilon_min = 0.1;
  auto stats = train_tabular(env, q, c, 10.0);
  EXPECT_EQ(stats.episode_rewards.size(), 3u);
  EXPECT_DOUBLE_EQ(stats.final_epsilon, 0.1);
  QTable wrong(4, 2);
  EXPECT_THROW(train_tabular(env, wrong, c, 10.0), Error);
}

TEST(Training, BoundedUnderClippedRewards) {
  // Every reward exceeds the clip; Q must stay within R_max / (1 - gamma).
  oracle::Mdp m;
  m.states = 2;
  m.actions = 2;
  m.edges = {{{1, 1e6}, {0, -1e6}}, {{0, 1e6}, {1, -1e6}}};
  testsupport::MdpEnvironment env(m, 50);
  QTable q(2, 2);
  auto c = uniform_exploration(2000, 0.9);
  c.schedule = LearningRateSchedule::Constant;
  c.learning_rate = 0.5;
  train_tabular(env, q, c, 10.0);
  for (double v : q.values()) {
    EXPECT_LE(std::abs(v), 10.0 / (1 - 0.9) + 1e-9);
    EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(AgentConfig, Validation) {
  AgentConfig c;
  EXPECT_NO_THROW(c.validate());
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), Error);
  c = AgentConfig{};
  c.discount = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = AgentConfig{};
  c.epsilon_min = 0.5;
  EXPECT_THROW(c.validate(), Error);
  c = AgentConfig{};
  c.episodes = 0;
  EXPECT_THROW(c.validate(), Error);
}
