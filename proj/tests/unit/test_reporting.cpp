#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "aiopt/csv.hpp"
#include "aiopt/ingest.hpp"
#include "aiopt/json_io.hpp"
#include "aiopt/pipeline.hpp"
#include "aiopt/reporting.hpp"

using namespace aiopt;

namespace {

StepOutcome outcome(double latency, double throughput, double cost) {
  StepOutcome o;
  o.snapshot.latency_ms = latency;
  o.snapshot.throughput_rps = throughput;
  o.snapshot.total_cost = cost;
  o.cost.infrastructure = cost;
  o.cost.total = cost;
  return o;
}

Report sample_report() {
  Report r;
  r.generated_at = 1700000000123;
  r.window = {1000, 5000};
  r.kpis = KpiSet{120.25, 180.5, 31.0, 0.55, 3000.0, 1.0 / 3.0, 0.125, 200.0};
  r.flaws.push_back(Flaw{"lat \"quoted\", rule", MetricName::LatencyMs, 1000, 2000, 600.5, "le 500", Severity::High,
                         ActionKind::ScaleUpReplicas});
  r.flaws.push_back(Flaw{"zscore", MetricName::CpuUtil, 3000, 3000, 0.97, "mean 0.5", Severity::Low, std::nullopt});
  Recommendation rec;
  rec.id = "rec-1";
  rec.state = state_from_index(123);
  rec.action = ActionKind::OptimizeCode;
  rec.q_value = -0.123456789012345;
  rec.predicted_savings = 120;
  rec.effort_cost = 50;
  rec.roi = roi_of(120, 50);
  rec.rank = 1;
  r.recommendations.push_back(rec);
  r.cost_breakdown_series.push_back({1000, CostBreakdown{20, 2, 1, 3, 26}});
  r.cost_breakdown_series.push_back({5000, CostBreakdown{25, 2, 51, 3, 81}});
  return r;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

}  // namespace

TEST(Kpis, SingleStep) {
  const std::vector<StepOutcome> o{outcome(200, 30, 30)};
  const auto k = compute_kpis(o, TargetsConfig{});
  ASSERT_TRUE(k.cost_per_transaction.has_value());
  EXPECT_EQ(*k.cost_per_transaction, 1.0);
  EXPECT_EQ(k.p95_latency_ms, 200.0);
  EXPECT_EQ(k.slo_breach_fraction, 0.0);
  EXPECT_EQ(k.cumulative_savings_vs_baseline, 0.0);
}

TEST(Kpis, BreachesSavingsAndP95Consistency) {
  std::vector<StepOutcome> o, base;
  std::vector<double> lat;
  for (int i = 0; i < 40; ++i) {
    const double l = 100 + 7.0 * ((i * 13) % 40);
    lat.push_back(l);
    o.push_back(outcome(l, 10, 75));
    base.push_back(outcome(l, 10, 80));
  }
  const auto k = compute_kpis(o, TargetsConfig{}, std::span<const StepOutcome>(base));
  EXPECT_EQ(k.total_cost, 3000.0);
  EXPECT_EQ(k.cumulative_savings_vs_baseline, 200.0);
  EXPECT_EQ(k.p95_latency_ms, percentile_nearest_rank(lat, 95));
  int breaches = 0;
  for (double l : lat) breaches += l > 200;
  EXPECT_DOUBLE_EQ(k.slo_breach_fraction, breaches / 40.0);
}

TEST(Kpis, ZeroThroughputHasNoCostPerTransaction) {
  const std::vector<StepOutcome> o{outcome(10, 0, 30), outcome(12, 0, 30)};
  const auto k = compute_kpis(o, TargetsConfig{});
  EXPECT_FALSE(k.cost_per_transaction.has_value());
  EXPECT_TRUE(to_json(k)["cost_per_transaction"].is_null());
}

TEST(Kpis, EmptySeries) {
  try {
    compute_kpis({}, TargetsConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySeries);
  }
}

TEST(ReportJson, RoundTripIdentity) {
  const auto r = sample_report();
  const auto text = export_report(r, ExportFormat::Json);
  const auto back = import_report_json(text);
  EXPECT_EQ(back, r);
  EXPECT_EQ(export_report(back, ExportFormat::Json), text);

  Report empty;
  EXPECT_EQ(import_report_json(export_report(empty, ExportFormat::Json)), empty);
}

TEST(ReportJson, FieldOrder) {
  const auto j = to_json(sample_report());
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"generated_at", "window", "kpis", "flaws", "recommendations",
                                             "cost_breakdown_series"}));
}

TEST(ReportJson, RoundTripOnSimulatedEpisodes) {
  AppConfig cfg;
  for (std::uint64_t ep = 0; ep < 5; ++ep) {
    RandomPolicy random(ep);
    const auto r = simulated_report(random, cfg, {}, 1234, ep);
    EXPECT_EQ(import_report_json(export_report(r, ExportFormat::Json)), r);
  }
}

TEST(ReportCsv, Sections) {
  const auto r = sample_report();
  const auto csv_text = export_report(r, "csv");
  const auto lines = lines_of(csv_text);
  auto find = [&](const std::string& s) { return std::find(lines.begin(), lines.end(), s) - lines.begin(); };
  const auto k = find("# kpis"), f = find("# flaws"), rc = find("# recommendations"), cs = find("# cost_series");
  ASSERT_LT(k, f);
  ASSERT_LT(f, rc);
  ASSERT_LT(rc, cs);
  ASSERT_LT(cs, static_cast<long>(lines.size()));
  EXPECT_EQ(f - k, 3);   // header + one row
  EXPECT_EQ(rc - f, 4);  // header + two rows
  EXPECT_EQ(static_cast<long>(lines.size()) - cs, 4);
  EXPECT_NE(csv_text.find("\"lat \"\"quoted\"\", rule\""), std::string::npos);
  EXPECT_NE(csv_text.find("\r\n"), std::string::npos);
  // ROI keeps full precision.
  EXPECT_NE(csv_text.find("1.372549"), std::string::npos);
  for (const auto& line : lines)
    if (!line.empty() && line[0] != '#') {
      EXPECT_NO_THROW(csv::split(line));
    }
}

TEST(ReportCsv, EmptyFlawSection) {
  auto r = sample_report();
  r.flaws.clear();
  const auto lines = lines_of(export_report(r, ExportFormat::Csv));
  const auto f = std::find(lines.begin(), lines.end(), "# flaws");
  ASSERT_NE(f, lines.end());
  EXPECT_EQ(*(f + 2), "# recommendations");
}

TEST(ReportCsv, UnsupportedFormat) {
  try {
    parse_export_format("xml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedFormat);
  }
}

TEST(Csv, FieldQuotingAndSplit) {
  EXPECT_EQ(csv::field("plain"), "plain");
  EXPECT_EQ(csv::field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv::field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv::split("a,\"b,c\",\"d\"\"e\""), (std::vector<std::string>{"a", "b,c", "d\"e"}));
  EXPECT_EQ(csv::number(0.1), "0.1");
}

TEST(Windows, FromSamples) {
  const auto samples = sorted_by_time(read_metrics_file(std::string(AIOPT_SAMPLES_DIR) + "/metrics.jsonl").samples);
  const auto w = window_outcomes(samples, 60000, Deployment{});
  ASSERT_FALSE(w.empty());
  for (std::size_t i = 1; i < w.size(); ++i) EXPECT_LT(w[i - 1].window_start, w[i].window_start);
  for (const auto& o : w) {
    EXPECT_EQ(o.outcome.cost.total, 26.0);
    EXPECT_EQ(o.outcome.cost.total, o.outcome.cost.infrastructure + o.outcome.cost.licensing +
                                        o.outcome.cost.maintenance + o.outcome.cost.operational);
  }
  AppConfig cfg;
  const auto r = report_from_samples(samples, cfg, {}, 99);
  ASSERT_TRUE(r.kpis.has_value());
  EXPECT_LE(r.window.start_ts, r.window.end_ts);
  for (const auto& p : r.cost_breakdown_series) {
    EXPECT_GE(p.ts, r.window.start_ts);
    EXPECT_LE(p.ts, r.window.end_ts);
  }
}

TEST(Pipeline, EmptySamplesGiveEmptyReport) {
  AppConfig cfg;
  const auto r = report_from_samples({}, cfg, {}, 5);
  EXPECT_FALSE(r.kpis.has_value());
  EXPECT_TRUE(r.cost_breakdown_series.empty());
  EXPECT_FALSE(current_view({}, cfg).has_value());
}

TEST(Pipeline, SimulatedReportTracksBaselineSavings) {
  AppConfig cfg;
  NoOpPolicy noop;
  const auto r = simulated_report(noop, cfg, {}, 1);
  ASSERT_TRUE(r.kpis.has_value());
  EXPECT_EQ(r.kpis->cumulative_savings_vs_baseline, 0.0);
  EXPECT_EQ(r.cost_breakdown_series.size(), static_cast<std::size_t>(cfg.env.episode_length_steps));
}

TEST(QTableJson, RoundTripAndShapeCheck) {
  QTable q(kNumStates, kNumActions);
  q.set_value(5, 3, 0.1 + 0.2);
  q.set_visits(5, 3, 17);
  AgentConfig agent;
  agent.schedule = LearningRateSchedule::InverseVisitCount;
  const auto j = qtable_to_json(q, agent, RewardWeights{});
  const auto back = qtable_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_TRUE(back.q == q);
  EXPECT_EQ(back.agent_config.schedule, LearningRateSchedule::InverseVisitCount);
  auto bad = j;
  bad["shape"] = {269, 7};
  try {
    qtable_from_json(nlohmann::json::parse(bad.dump()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(AppConfigJson, SampleConfigAndUnknownKeys) {
  const auto cfg = load_app_config(std::string(AIOPT_SAMPLES_DIR) + "/config.json");
  EXPECT_EQ(cfg.env.rng_seed, 42u);
  EXPECT_EQ(cfg.detector.static_bounds.at(MetricName::LatencyMs).max, 1000);
  EXPECT_THROW(app_config_from_json(nlohmann::json::parse(R"({"env":{"bogus":1}})")), Error);
  EXPECT_THROW(app_config_from_json(nlohmann::json::parse(R"({"targets":{"slo_latency_ms":-1}})")), Error);
  const auto round = app_config_from_json(nlohmann::json::parse(to_json(cfg).dump()));
  EXPECT_EQ(to_json(round).dump(), to_json(cfg).dump());
}
