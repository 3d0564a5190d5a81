// aiopt: batch driver for ingestion, detection, training, recommendation,
// what-if simulation, reporting, and the HTTP service.
//
// Exit codes: 0 success, 1 validation error, 2 runtime error.

#include <csignal>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "aiopt/core_model.hpp"
#include "aiopt/error.hpp"
#include "aiopt/flawdet.hpp"
#include "aiopt/ingest.hpp"
#include "aiopt/json_io.hpp"
#include "aiopt/pipeline.hpp"
#include "aiopt/recommender.hpp"
#include "aiopt/reporting.hpp"
#include "aiopt/service.hpp"

namespace {

using namespace aiopt;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

/// Error raised by the CLI itself with an explicit exit code.
struct CliError : std::runtime_error {
  CliError(int exit_code, std::string code, const std::string& message)
      : std::runtime_error(message), exit_code(exit_code), code(std::move(code)) {}
  int exit_code;
  std::string code;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::EpisodeExhausted:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::UnknownRecommendation:
    case ErrorCode::AlreadyResolved:
    case ErrorCode::EmptySeries:
      return kExitRuntime;
    default:
      return kExitValidation;
  }
}

struct Options {
  std::string config_path;
  bool json_errors = false;
  std::string out;
  std::string file;
  std::string rules;
  std::string qtable;
  std::string format = "json";
  std::string action;
  std::string baseline = "random";
  std::string addr;
  std::string state_file;
  std::string ui_dir;
  std::optional<int> episodes;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> generated_at;
  int top = 3;
  int horizon = kDefaultHorizon;
  bool quiet = false;
};

/// Files referenced by the command line, parsed before any work starts.
struct Inputs {
  AppConfig config;
  std::optional<IngestResult> metrics;
  std::optional<LoadedQTable> qtable;
};

Inputs load_inputs(const Options& o) {
  Inputs in;
  if (!o.config_path.empty()) in.config = load_app_config(o.config_path);
  if (!o.rules.empty()) in.config.rules = rules_from_json(read_json_file(o.rules));
  if (o.seed) {
    in.config.env.rng_seed = *o.seed;
    in.config.agent.rng_seed = *o.seed;
  }
  if (o.episodes) {
    if (*o.episodes < 1) throw CliError(kExitValidation, "InvalidConfig", "--episodes must be >= 1");
    in.config.agent.episodes = *o.episodes;
  }
  if (!o.file.empty()) in.metrics = read_metrics_file(o.file);
  if (!o.qtable.empty()) in.qtable = qtable_from_json(read_json_file(o.qtable));
  return in;
}

void write_output(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw CliError(kExitRuntime, "IoError", "cannot write '" + o.out + "'");
  f << text;
  if (!f) throw CliError(kExitRuntime, "IoError", "failed writing '" + o.out + "'");
}

std::vector<MetricSample> require_metrics(const Inputs& in, const char* command) {
  if (!in.metrics) throw CliError(kExitValidation, "MissingInput", std::string(command) + " requires --file");
  return in.metrics->samples;
}

// --- subcommands -------------------------------------------------------------

int cmd_ingest(const Options& o, const Inputs& in) {
  const auto& m = *in.metrics;
  std::string text;
  for (const auto& s : m.samples) text += serialize_metric_line(s) + "\n";
  write_output(o, text);
  std::cerr << "ingested " << m.samples.size() << ", rejected " << m.rejected.size() << "\n";
  for (const auto& r : m.rejected) std::cerr << "  line " << r.index << ": " << r.reason << "\n";
  return kExitOk;
}

int cmd_detect(const Options& o, const Inputs& in) {
  const auto flaws = detect_in(require_metrics(in, "detect"), in.config);
  ojson out;
  out["flaws"] = ojson::array();
  for (const auto& f : flaws) out["flaws"].push_back(to_json(f));
  out["summary"] = diagnose(flaws).summary;
  write_output(o, out.dump(2) + "\n");
  return kExitOk;
}

int cmd_train(const Options& o, const Inputs& in) {
  const auto& c = in.config;
  auto result = train(c.env, c.targets, c.agent, c.reward_weights);
  write_output(o, qtable_to_json(result.q, c.agent, c.reward_weights).dump() + "\n");
  if (!o.quiet) {
    const auto& r = result.stats.episode_rewards;
    std::cerr << "trained " << r.size() << " episodes; last episode reward " << r.back() << ", final epsilon "
              << result.stats.final_epsilon << "\n";
  }
  return kExitOk;
}

/// Current state from --file when given, otherwise the simulator's reset state.
std::pair<DiscreteState, EnvState> current_or_reset(const Inputs& in) {
  if (in.metrics) {
    auto view = current_view(in.metrics->samples, in.config);
    if (!view) throw CliError(kExitValidation, "NoData", "no complete metric window in --file");
    return {view->state, view->env};
  }
  const auto origin = reset(in.config.env);
  return {discretize(observe_outcome(origin, in.config.env).snapshot, in.config.targets), origin};
}

int cmd_recommend(const Options& o, const Inputs& in) {
  if (!in.qtable) throw CliError(kExitValidation, "MissingInput", "recommend requires --qtable");
  if (o.horizon < 1) throw CliError(kExitValidation, "InvalidConfig", "--horizon must be >= 1");
  const auto [state, origin] = current_or_reset(in);
  IdSource ids;
  const auto recs = recommend(in.qtable->q, state, origin, o.top, in.config.env, ids, o.horizon);
  ojson out = ojson::array();
  for (const auto& r : recs) out.push_back(to_json(r));
  write_output(o, out.dump(2) + "\n");
  return kExitOk;
}

int cmd_simulate(const Options& o, const Inputs& in) {
  const auto action = parse_action(o.action);
  if (o.horizon < 1) throw CliError(kExitValidation, "InvalidConfig", "--horizon must be >= 1");
  const auto [state, origin] = current_or_reset(in);
  (void)state;
  write_output(o, to_json(simulate_whatif(origin, action, in.config.env, o.horizon)).dump(2) + "\n");
  return kExitOk;
}

int cmd_report(const Options& o, const Inputs& in) {
  const auto format = parse_export_format(o.format);
  const std::int64_t generated_at = o.generated_at.value_or(now_epoch_ms());
  std::vector<Recommendation> recs;
  if (in.qtable) {
    const auto [state, origin] = current_or_reset(in);
    IdSource ids("rec-report");
    recs = recommend(in.qtable->q, state, origin, o.top, in.config.env, ids, o.horizon);
  }
  Report report;
  if (in.metrics) {
    report = report_from_samples(in.metrics->samples, in.config, std::move(recs), generated_at);
  } else if (in.qtable) {
    GreedyPolicy greedy(in.qtable->q);
    report = simulated_report(greedy, in.config, std::move(recs), generated_at);
  } else {
    NoOpPolicy noop;
    report = simulated_report(noop, in.config, std::move(recs), generated_at);
  }
  write_output(o, export_report(report, format));
  return kExitOk;
}

int cmd_evaluate(const Options& o, const Inputs& in) {
  if (!in.qtable) throw CliError(kExitValidation, "MissingInput", "evaluate requires --qtable");
  BaselinePolicy baseline;
  if (o.baseline == "noop" || o.baseline == "no_op")
    baseline = BaselinePolicy::NoOp;
  else if (o.baseline == "random")
    baseline = BaselinePolicy::Random;
  else
    throw CliError(kExitValidation, "InvalidConfig", "--baseline must be noop or random");
  const int episodes = o.episodes.value_or(100);
  const auto& c = in.config;
  // Evaluation episodes draw from their own seed stream, disjoint from training.
  const auto cmp = evaluate(in.qtable->q, c.env, c.targets, c.reward_weights, episodes, baseline, c.env.rng_seed);
  ojson out;
  out["learned"] = to_json(cmp.learned);
  out["baseline"] = to_json(cmp.baseline);
  write_output(o, out.dump(2) + "\n");
  return kExitOk;
}

ApiServer* g_server = nullptr;

extern "C" void handle_stop(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const Options& o, const Inputs& in) {
  std::string addr = o.addr;
  if (addr.empty()) {
    const char* env = std::getenv("AIOPT_ADDR");
    addr = env ? env : "127.0.0.1:8080";
  }
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw CliError(kExitValidation, "InvalidConfig", "address must be HOST:PORT");
  const std::string host = addr.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw CliError(kExitValidation, "InvalidConfig", "bad port in '" + addr + "'");
  }

  ApiServer server(in.config);
  if (!o.ui_dir.empty() && !server.mount_ui(o.ui_dir))
    throw CliError(kExitValidation, "InvalidConfig", "cannot serve UI from '" + o.ui_dir + "'");
  if (!o.state_file.empty() && std::ifstream(o.state_file)) server.load_session(read_json_file(o.state_file));

  g_server = &server;
  std::signal(SIGINT, handle_stop);
  std::signal(SIGTERM, handle_stop);
  std::cerr << "listening on " << host << ":" << port << "\n";
  const bool ok = server.listen(host, port);
  g_server = nullptr;
  if (!o.state_file.empty()) {
    std::ofstream f(o.state_file);
    f << session_to_json(*server.store().snapshot()).dump() << "\n";
  }
  if (!ok && port != 0) throw CliError(kExitRuntime, "BindError", "cannot listen on " + addr);
  return kExitOk;
}

void report_error(const Options& o, int exit_code, const std::string& code, const std::string& message) {
  if (o.json_errors) {
    ojson j;
    j["error"] = code;
    j["message"] = message;
    j["exit_code"] = exit_code;
    std::cerr << j.dump() << "\n";
  } else {
    std::cerr << "error: " << message << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"aiopt - cost optimization recommendation engine"};
  app.require_subcommand(1);
  app.add_option("--config", o.config_path, "JSON configuration document")->check(CLI::ExistingFile);
  app.add_flag("--json-errors", o.json_errors, "Emit errors on stderr as JSON");

  auto* ingest = app.add_subcommand("ingest", "Validate a metric file (JSON-Lines or CSV) and emit JSON-Lines");
  ingest->add_option("--file", o.file, "Metric file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", o.out, "Output file (default stdout)");

  auto* detect = app.add_subcommand("detect", "Detect flaws in a metric file");
  detect->add_option("--rules", o.rules, "Rule file (JSON array)")->check(CLI::ExistingFile);
  detect->add_option("--file", o.file, "Metric file")->required()->check(CLI::ExistingFile);
  detect->add_option("--out", o.out, "Output file (default stdout)");

  auto* trn = app.add_subcommand("train", "Train a Q-table on the simulator");
  trn->add_option("--episodes", o.episodes, "Training episodes");
  trn->add_option("--seed", o.seed, "Seed for the simulator and the agent");
  trn->add_option("--out", o.out, "Q-table output file (default stdout)");
  trn->add_flag("--quiet", o.quiet, "Suppress the training summary");

  auto* rec = app.add_subcommand("recommend", "Ranked recommendations for the current state");
  rec->add_option("--qtable", o.qtable, "Q-table file")->required()->check(CLI::ExistingFile);
  rec->add_option("--top", o.top, "Number of recommendations (1-7)");
  rec->add_option("--file", o.file, "Metric file giving the current state")->check(CLI::ExistingFile);
  rec->add_option("--horizon", o.horizon, "What-if horizon in steps");
  rec->add_option("--out", o.out, "Output file (default stdout)");

  auto* sim = app.add_subcommand("simulate", "What-if simulation of one action");
  sim->add_option("--action", o.action, "Action name, e.g. enable_cache")->required();
  sim->add_option("--horizon", o.horizon, "Horizon in steps");
  sim->add_option("--file", o.file, "Metric file giving the current state")->check(CLI::ExistingFile);
  sim->add_option("--out", o.out, "Output file (default stdout)");

  auto* rep = app.add_subcommand("report", "KPI report as JSON or sectioned CSV");
  rep->add_option("--format", o.format, "json or csv");
  rep->add_option("--out", o.out, "Output file (default stdout)");
  rep->add_option("--file", o.file, "Metric file (default: one simulated episode)")->check(CLI::ExistingFile);
  rep->add_option("--qtable", o.qtable, "Q-table for recommendations and the simulated policy")
      ->check(CLI::ExistingFile);
  rep->add_option("--rules", o.rules, "Rule file (JSON array)")->check(CLI::ExistingFile);
  rep->add_option("--top", o.top, "Recommendations to include (1-7)");
  rep->add_option("--horizon", o.horizon, "What-if horizon in steps");
  rep->add_option("--generated-at", o.generated_at, "Report timestamp in epoch ms (default now)");

  auto* evl = app.add_subcommand("evaluate", "Compare the greedy policy against a baseline");
  evl->add_option("--qtable", o.qtable, "Q-table file")->required()->check(CLI::ExistingFile);
  evl->add_option("--episodes", o.episodes, "Evaluation episodes (default 100)");
  evl->add_option("--baseline", o.baseline, "noop or random");
  evl->add_option("--out", o.out, "Output file (default stdout)");

  auto* srv = app.add_subcommand("serve", "Run the HTTP API");
  srv->add_option("--addr", o.addr, "HOST:PORT (default $AIOPT_ADDR or 127.0.0.1:8080)");
  srv->add_option("--state-file", o.state_file, "Load session on start, save on shutdown");
  srv->add_option("--ui-dir", o.ui_dir, "Static dashboard directory served under /ui");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error(o, kExitValidation, "UsageError", e.what());
    return kExitValidation;
  }

  try {
    if (o.top < 1 || o.top > static_cast<int>(kNumActions))
      throw CliError(kExitValidation, "InvalidConfig", "--top must lie in [1, 7]");
    const Inputs in = load_inputs(o);
    if (*ingest) return cmd_ingest(o, in);
    if (*detect) return cmd_detect(o, in);
    if (*trn) return cmd_train(o, in);
    if (*rec) return cmd_recommend(o, in);
    if (*sim) return cmd_simulate(o, in);
    if (*rep) return cmd_report(o, in);
    if (*evl) return cmd_evaluate(o, in);
    if (*srv) return cmd_serve(o, in);
  } catch (const CliError& e) {
    report_error(o, e.exit_code, e.code, e.what());
    return e.exit_code;
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    report_error(o, code, std::string(to_string(e.code())), e.what());
    return code;
  } catch (const std::exception& e) {
    report_error(o, kExitRuntime, "RuntimeError", e.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}
