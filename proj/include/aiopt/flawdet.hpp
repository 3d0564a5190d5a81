#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "aiopt/core_model.hpp"
#include "aiopt/error.hpp"

namespace aiopt {

enum class Severity { Low = 0, Medium = 1, High = 2 };

constexpr std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::Low: return "low";
    case Severity::Medium: return "medium";
    case Severity::High: return "high";
  }
  return "";
}

inline Severity parse_severity(std::string_view s) {
  if (s == "low") return Severity::Low;
  if (s == "medium") return Severity::Medium;
  if (s == "high") return Severity::High;
  throw Error(ErrorCode::InvalidConfig, "unknown severity '" + std::string(s) + "'");
}

enum class Comparator { GT, LT, GE, LE };

constexpr std::string_view to_string(Comparator c) {
  switch (c) {
    case Comparator::GT: return "gt";
    case Comparator::LT: return "lt";
    case Comparator::GE: return "ge";
    case Comparator::LE: return "le";
  }
  return "";
}

inline Comparator parse_comparator(std::string_view s) {
  if (s == "gt") return Comparator::GT;
  if (s == "lt") return Comparator::LT;
  if (s == "ge") return Comparator::GE;
  if (s == "le") return Comparator::LE;
  throw Error(ErrorCode::InvalidConfig, "unknown comparator '" + std::string(s) + "'");
}

constexpr bool compare(Comparator c, double value, double bound) {
  switch (c) {
    case Comparator::GT: return value > bound;
    case Comparator::LT: return value < bound;
    case Comparator::GE: return value >= bound;
    case Comparator::LE: return value <= bound;
  }
  return false;
}

struct Bounds {
  double min = 0.0;
  double max = 0.0;
  friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct DetectorConfig {
  std::size_t window_size = 100;
  double z_threshold = 3.0;
  double percentile = 99.0;
  // Trailing-window percentile exceedance is noisy on ordinary jitter, so it is opt-in.
  bool percentile_detection = false;
  std::map<MetricName, Bounds> static_bounds;

  void validate() const {
    if (window_size < 2) throw Error(ErrorCode::InvalidConfig, "window_size must be >= 2");
    if (!(z_threshold > 0.0)) throw Error(ErrorCode::InvalidConfig, "z_threshold must be > 0");
    if (!(percentile > 0.0 && percentile <= 100.0))
      throw Error(ErrorCode::InvalidConfig, "percentile must lie in (0, 100]");
  }
};

struct FlawRule {
  std::string id;
  MetricName metric = MetricName::LatencyMs;
  Comparator comparator = Comparator::GT;
  double bound = 0.0;
  std::size_t consecutive = 1;
  Severity severity = Severity::Medium;
  std::optional<ActionKind> suggested_action;

  friend bool operator==(const FlawRule&, const FlawRule&) = default;
};

struct Flaw {
  std::string rule_or_detector;
  MetricName metric = MetricName::LatencyMs;
  std::int64_t first_ts = 0;
  std::int64_t last_ts = 0;
  double observed = 0.0;
  std::string expected;
  Severity severity = Severity::Medium;
  std::optional<ActionKind> suggested_action;

  friend bool operator==(const Flaw&, const Flaw&) = default;
};

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct WindowStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

inline WindowStats window_stats(std::span<const double> window) {
  const auto n = static_cast<double>(window.size());
  double sum = 0.0;
  for (double v : window) sum += v;
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : window) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / n)};
}

/// True iff the candidate lies at least `threshold` population standard
/// deviations from the window mean. A flat window flags any differing value.
inline bool zscore_anomaly(std::span<const double> window, double candidate, double threshold) {
  if (window.size() < 2) throw Error(ErrorCode::WindowTooSmall, "z-score needs at least 2 samples");
  const auto [mean, sigma] = window_stats(window);
  if (sigma > 0.0) return std::abs(candidate - mean) / sigma >= threshold;
  return candidate != mean;
}

/// Nearest-rank percentile: element at 1-based rank ceil(p/100 * n) of the sorted window.
inline double percentile_nearest_rank(std::span<const double> window, double p) {
  if (window.empty()) throw Error(ErrorCode::EmptyWindow, "percentile of empty window");
  if (!(p > 0.0 && p <= 100.0)) throw Error(ErrorCode::PercentileOutOfRange, "p must lie in (0, 100]");
  std::vector<double> sorted(window.begin(), window.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

inline double median(std::span<const double> window) {
  if (window.empty()) throw Error(ErrorCode::EmptyWindow, "median of empty window");
  std::vector<double> sorted(window.begin(), window.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

// ---------------------------------------------------------------------------
// Detectors
// ---------------------------------------------------------------------------

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

inline std::optional<Flaw> check_static_bounds(const MetricSample& sample, const DetectorConfig& config) {
  auto it = config.static_bounds.find(sample.metric);
  if (it == config.static_bounds.end()) return std::nullopt;
  const auto& b = it->second;
  if (sample.value >= b.min && sample.value <= b.max) return std::nullopt;
  return Flaw{"static-bound",
              sample.metric,
              sample.timestamp,
              sample.timestamp,
              sample.value,
              "within [" + format_number(b.min) + ", " + format_number(b.max) + "]",
              Severity::Medium,
              std::nullopt};
}

namespace detail {

inline void require_sorted(std::span<const MetricSample> stream) {
  for (std::size_t i = 1; i < stream.size(); ++i) {
    if (stream[i].timestamp < stream[i - 1].timestamp)
      throw Error(ErrorCode::UnsortedStream, "stream not sorted by timestamp at index " + std::to_string(i));
  }
}

inline bool flaw_order(const Flaw& a, const Flaw& b) {
  if (a.first_ts != b.first_ts) return a.first_ts < b.first_ts;
  return a.rule_or_detector < b.rule_or_detector;
}

}  // namespace detail

/// One Flaw per maximal run of at least `consecutive` same-metric samples
/// satisfying a rule. Output ordered by first_ts, then rule id.
inline std::vector<Flaw> apply_rules(std::span<const MetricSample> stream, std::span<const FlawRule> rules) {
  detail::require_sorted(stream);
  std::vector<Flaw> out;
  for (const auto& rule : rules) {
    std::size_t run = 0;
    std::int64_t first = 0, last = 0;
    double worst = 0.0;
    auto close_run = [&] {
      if (run >= rule.consecutive) {
        out.push_back(Flaw{rule.id, rule.metric, first, last, worst,
                           std::string(to_string(rule.metric)) + " " + std::string(to_string(rule.comparator)) +
                               " " + format_number(rule.bound) + " for " + std::to_string(rule.consecutive) +
                               " consecutive samples",
                           rule.severity, rule.suggested_action});
      }
      run = 0;
    };
    for (const auto& s : stream) {
      if (s.metric != rule.metric) continue;
      if (compare(rule.comparator, s.value, rule.bound)) {
        if (run == 0) {
          first = s.timestamp;
          worst = s.value;
        }
        // Keep the sample farthest past the bound.
        const bool upper = rule.comparator == Comparator::GT || rule.comparator == Comparator::GE;
        if (upper ? s.value > worst : s.value < worst) worst = s.value;
        last = s.timestamp;
        ++run;
      } else {
        close_run();
      }
    }
    close_run();
  }
  std::stable_sort(out.begin(), out.end(), detail::flaw_order);
  return out;
}

/// Trailing-window z-score detection per metric. A sample is tested once
/// `window_size` earlier samples of its metric exist; consecutive anomalous
/// samples merge into one Flaw.
inline std::vector<Flaw> detect_zscore(std::span<const MetricSample> stream, const DetectorConfig& config) {
  detail::require_sorted(stream);
  std::vector<Flaw> out;
  for (auto metric : kAllMetrics) {
    std::vector<const MetricSample*> series;
    for (const auto& s : stream)
      if (s.metric == metric) series.push_back(&s);

    std::vector<double> window;
    std::optional<Flaw> open;
    for (std::size_t i = 0; i < series.size(); ++i) {
      bool anomalous = false;
      WindowStats stats;
      if (i >= config.window_size) {
        window.clear();
        for (std::size_t j = i - config.window_size; j < i; ++j) window.push_back(series[j]->value);
        anomalous = zscore_anomaly(window, series[i]->value, config.z_threshold);
        stats = window_stats(window);
      }
      if (anomalous) {
        const double v = series[i]->value;
        if (open) {
          open->last_ts = series[i]->timestamp;
          if (std::abs(v - stats.mean) > std::abs(open->observed - stats.mean)) open->observed = v;
        } else {
          open = Flaw{"zscore",
                      metric,
                      series[i]->timestamp,
                      series[i]->timestamp,
                      v,
                      "mean " + format_number(stats.mean) + " +/- " + format_number(config.z_threshold) + " sd (sd " +
                          format_number(stats.stddev) + ")",
                      Severity::High,
                      std::nullopt};
        }
      } else if (open) {
        out.push_back(*open);
        open.reset();
      }
    }
    if (open) out.push_back(*open);
  }
  std::stable_sort(out.begin(), out.end(), detail::flaw_order);
  return out;
}

/// Flags samples strictly above the configured nearest-rank percentile of
/// their trailing window.
inline std::vector<Flaw> detect_percentile(std::span<const MetricSample> stream, const DetectorConfig& config) {
  detail::require_sorted(stream);
  std::vector<Flaw> out;
  for (auto metric : kAllMetrics) {
    std::vector<double> history;
    for (const auto& s : stream) {
      if (s.metric != metric) continue;
      if (history.size() >= config.window_size) {
        std::span<const double> window(history.data() + history.size() - config.window_size, config.window_size);
        const double limit = percentile_nearest_rank(window, config.percentile);
        if (s.value > limit) {
          out.push_back(Flaw{"percentile", metric, s.timestamp, s.timestamp, s.value,
                             "<= p" + format_number(config.percentile) + " = " + format_number(limit), Severity::Low,
                             std::nullopt});
        }
      }
      history.push_back(s.value);
    }
  }
  std::stable_sort(out.begin(), out.end(), detail::flaw_order);
  return out;
}

/// Full detection pass: static bounds, z-score, optional percentile, and rules.
inline std::vector<Flaw> detect_flaws(std::span<const MetricSample> stream, const DetectorConfig& config,
                                      std::span<const FlawRule> rules) {
  config.validate();
  detail::require_sorted(stream);
  std::vector<Flaw> out;
  for (const auto& s : stream) {
    if (auto f = check_static_bounds(s, config)) out.push_back(std::move(*f));
  }
  for (auto& f : detect_zscore(stream, config)) out.push_back(std::move(f));
  if (config.percentile_detection) {
    for (auto& f : detect_percentile(stream, config)) out.push_back(std::move(f));
  }
  for (auto& f : apply_rules(stream, rules)) out.push_back(std::move(f));
  std::stable_sort(out.begin(), out.end(), detail::flaw_order);
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct FlawGroup {
  MetricName metric = MetricName::LatencyMs;
  Severity max_severity = Severity::Low;
  std::vector<Flaw> flaws;
  double median_observed = 0.0;
};

struct DiagnosticReport {
  std::vector<FlawGroup> groups;
  std::string summary;

  bool empty() const { return groups.empty(); }
};

/// Groups flaws by metric; groups ordered by max severity then flaw count
/// (both descending), remaining ties by metric name.
inline DiagnosticReport diagnose(std::span<const Flaw> flaws) {
  std::map<MetricName, FlawGroup> by_metric;
  for (const auto& f : flaws) {
    auto& g = by_metric[f.metric];
    g.metric = f.metric;
    if (g.flaws.empty() || f.severity > g.max_severity) g.max_severity = f.severity;
    g.flaws.push_back(f);
  }
  DiagnosticReport report;
  for (auto& [m, g] : by_metric) {
    std::vector<double> observed;
    for (const auto& f : g.flaws) observed.push_back(f.observed);
    g.median_observed = median(observed);
    report.groups.push_back(std::move(g));
  }
  std::stable_sort(report.groups.begin(), report.groups.end(), [](const FlawGroup& a, const FlawGroup& b) {
    if (a.max_severity != b.max_severity) return a.max_severity > b.max_severity;
    if (a.flaws.size() != b.flaws.size()) return a.flaws.size() > b.flaws.size();
    return to_string(a.metric) < to_string(b.metric);
  });

  std::ostringstream os;
  if (report.groups.empty()) {
    os << "No flaws detected.\n";
  } else {
    os << "Detected " << flaws.size() << " flaw(s) across " << report.groups.size() << " metric(s).\n";
    for (const auto& g : report.groups) {
      os << "[" << to_string(g.max_severity) << "] " << to_string(g.metric) << ": " << g.flaws.size()
         << " flaw(s), median observed " << format_number(g.median_observed) << "\n";
      for (const auto& f : g.flaws) {
        os << "  - " << f.rule_or_detector << " " << f.first_ts << ".." << f.last_ts << " observed "
           << format_number(f.observed) << " (expected " << f.expected << ")";
        if (f.suggested_action) os << "; suggested remediation: " << to_string(*f.suggested_action);
        os << "\n";
      }
    }
  }
  report.summary = os.str();
  return report;
}

}  // namespace aiopt
