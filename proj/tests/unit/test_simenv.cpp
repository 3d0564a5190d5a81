#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "aiopt/json_io.hpp"
#include "aiopt/simenv.hpp"

using namespace aiopt;

namespace {

EnvConfig frozen() {
  EnvConfig c;
  c.load_amplitude_rps = 0;
  c.load_noise_rps = 0;
  c.imbalance_drift_per_step = 0;
  return c;
}

}  // namespace

TEST(Load, Examples) {
  auto c = frozen();
  for (int t = 0; t < 50; ++t) EXPECT_DOUBLE_EQ(load_at(c, t), 30.0);
  c.load_amplitude_rps = 15;
  EXPECT_NEAR(load_at(c, 6), 45.0, 1e-12);
  EXPECT_NEAR(load_at(c, 18), 15.0, 1e-12);
  EnvConfig noisy;
  noisy.rng_seed = 17;
  for (int t = 0; t < 100; ++t) {
    EXPECT_EQ(load_at(noisy, t), load_at(noisy, t));
    const double mean = 30 + 15 * std::sin(2 * std::numbers::pi * t / 24.0);
    EXPECT_LE(std::abs(load_at(noisy, t) - mean), 2.0 + 1e-12);
  }
}

TEST(Load, FlooredAtZero) {
  EnvConfig c;
  c.load_mean_rps = 1;
  c.load_amplitude_rps = 1;
  c.load_noise_rps = 5;
  for (int t = 0; t < 200; ++t) EXPECT_GE(load_at(c, t), 0.0);
}

TEST(Queueing, Examples) {
  const auto c = frozen();
  EnvState s;
  s.current_load_rps = 30;
  auto ul = utilization_and_latency(s, c);
  EXPECT_NEAR(ul.rho, 0.75, 1e-12);
  EXPECT_NEAR(ul.latency_ms, 200.0, 1e-9);
  s.cache_enabled = true;
  ul = utilization_and_latency(s, c);
  EXPECT_NEAR(ul.rho, 0.375, 1e-12);
  EXPECT_NEAR(ul.latency_ms, 80.0, 1e-9);
  s.cache_enabled = false;
  s.current_load_rps = 1000;
  ul = utilization_and_latency(s, c);
  EXPECT_EQ(ul.rho, 0.99);
  EXPECT_NEAR(ul.latency_ms, 1000 * 0.05 / 0.01, 1e-9);
}

TEST(Queueing, Invariants) {
  const EnvConfig c;
  for (int replicas = 1; replicas <= c.max_replicas; ++replicas)
    for (double load = 0; load <= 200; load += 3.7)
      for (double imb = 1.0; imb <= 2.0; imb += 0.25)
        for (int flags = 0; flags < 4; ++flags) {
          EnvState s{0, replicas, (flags & 1) != 0, (flags & 2) != 0, imb, load};
          const auto ul = utilization_and_latency(s, c);
          ASSERT_GE(ul.rho, 0.0);
          ASSERT_LE(ul.rho, 0.99);
          ASSERT_GE(ul.latency_ms, 1000 * effective_service_time(s, c) - 1e-9);
          EnvState cached = s;
          cached.cache_enabled = true;
          EXPECT_LE(utilization_and_latency(cached, c).rho, ul.rho);
          EXPECT_LE(utilization_and_latency(cached, c).latency_ms, ul.latency_ms);
          if (replicas < c.max_replicas) {
            EnvState up = s;
            ++up.replicas;
            EXPECT_LE(utilization_and_latency(up, c).rho, ul.rho);
          }
        }
}

TEST(Cost, Examples) {
  const EnvConfig c;
  EnvState s;
  s.cache_enabled = true;
  auto cost = cost_of(s, c);
  EXPECT_EQ(cost.infrastructure, 25);
  EXPECT_EQ(cost.licensing, 2);
  EXPECT_EQ(cost.maintenance, 1);
  EXPECT_EQ(cost.operational, 3);
  EXPECT_EQ(cost.total, 31);
  s.replicas = 1;
  s.cache_enabled = false;
  EXPECT_EQ(cost_of(s, c).total, 16);
  EXPECT_EQ(cost_of(s, c, 50).maintenance, 51);
}

TEST(Step, ActionEffects) {
  const auto c = frozen();
  auto s = reset(c);
  s.replicas = c.max_replicas;
  EXPECT_EQ(step(s, ActionKind::ScaleUpReplicas, c).env_state.replicas, c.max_replicas);
  s.replicas = 1;
  EXPECT_EQ(step(s, ActionKind::ScaleDownReplicas, c).env_state.replicas, 1);
  EXPECT_TRUE(step(s, ActionKind::EnableCache, c).env_state.cache_enabled);
  s.cache_enabled = true;
  EXPECT_TRUE(step(s, ActionKind::EnableCache, c).env_state.cache_enabled);
  EXPECT_FALSE(step(s, ActionKind::DisableCache, c).env_state.cache_enabled);
  s.imbalance = 1.7;
  EXPECT_EQ(step(s, ActionKind::RebalanceWorkload, c).env_state.imbalance, 1.0);
  EXPECT_EQ(step(s, ActionKind::NoOp, c).env_state.step, s.step + 1);
}

TEST(Step, DriftAppliedAfterActionAndCapped) {
  EnvConfig c;
  auto s = reset(c);
  s.imbalance = 1.5;
  EXPECT_DOUBLE_EQ(step(s, ActionKind::RebalanceWorkload, c).env_state.imbalance, 1.05);
  s.imbalance = 1.98;
  EXPECT_DOUBLE_EQ(step(s, ActionKind::NoOp, c).env_state.imbalance, 2.0);
}

TEST(Step, OptimizeCodeChargedOnce) {
  const EnvConfig c;
  auto s = reset(c);
  const auto first = step(s, ActionKind::OptimizeCode, c);
  EXPECT_EQ(first.cost.maintenance, 51);
  EXPECT_TRUE(first.env_state.code_optimized);
  const auto second = step(first.env_state, ActionKind::OptimizeCode, c);
  EXPECT_EQ(second.cost.maintenance, 1);
}

TEST(Step, EpisodeExhausted) {
  const EnvConfig c;
  auto s = reset(c);
  for (int t = 0; t < c.episode_length_steps; ++t) s = step(s, ActionKind::NoOp, c).env_state;
  try {
    step(s, ActionKind::NoOp, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EpisodeExhausted);
  }
}

TEST(Reset, SeedIsolation) {
  EnvConfig a, b;
  a.rng_seed = 1;
  b.rng_seed = 2;
  const auto sa = reset(a), sa2 = reset(a), sb = reset(b);
  EXPECT_EQ(sa, sa2);
  EXPECT_EQ(sa.step, 0);
  EXPECT_EQ(sa.replicas, 2);
  EXPECT_FALSE(sa.cache_enabled);
  EXPECT_FALSE(sa.code_optimized);
  EXPECT_EQ(sa.imbalance, 1.0);
  EXPECT_NE(sa.current_load_rps, sb.current_load_rps);
  auto sb_fix = sb;
  sb_fix.current_load_rps = sa.current_load_rps;
  EXPECT_EQ(sa, sb_fix);
}

TEST(Invariants, CostIdentityReplicaBoundsAndReplay) {
  // Pseudo-random action sequences from a fixed generator over many seeds.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EnvConfig c;
    c.rng_seed = seed;
    auto run = [&] {
      std::vector<std::string> out;
      CounterStream actions(seed + 1000);
      auto s = reset(c);
      for (int t = 0; t < c.episode_length_steps; ++t) {
        const auto a = action_from_ordinal(actions.next_below(kNumActions));
        const auto o = step(s, a, c);
        EXPECT_EQ(o.cost.total, o.cost.infrastructure + o.cost.licensing + o.cost.maintenance + o.cost.operational);
        EXPECT_EQ(o.snapshot.total_cost, o.cost.total);
        EXPECT_GE(o.env_state.replicas, 1);
        EXPECT_LE(o.env_state.replicas, c.max_replicas);
        EXPECT_GE(o.env_state.imbalance, 1.0);
        EXPECT_LE(o.env_state.imbalance, 2.0);
        EXPECT_GE(o.snapshot.cpu_util, 0.0);
        EXPECT_LE(o.snapshot.cpu_util, 0.99);
        out.push_back(to_json(o).dump());
        s = o.env_state;
      }
      return out;
    };
    EXPECT_EQ(run(), run()) << "seed " << seed;
  }
}

TEST(Invariants, FrozenNoOpEpisodeIsConstant) {
  const auto c = frozen();
  auto s = reset(c);
  const auto initial = cost_of(s, c).total;
  double total = 0;
  for (int t = 0; t < c.episode_length_steps; ++t) {
    const auto o = step(s, ActionKind::NoOp, c);
    total += o.cost.total;
    s = o.env_state;
  }
  EXPECT_EQ(total, c.episode_length_steps * initial);
}

TEST(Config, Validation) {
  EnvConfig c;
  c.cache_hit_rate = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = EnvConfig{};
  c.load_amplitude_rps = 40;
  EXPECT_THROW(c.validate(), Error);
  c = EnvConfig{};
  c.max_replicas = 0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_NO_THROW(EnvConfig{}.validate());
}
