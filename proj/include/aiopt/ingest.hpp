#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "aiopt/core_model.hpp"
#include "aiopt/csv.hpp"
#include "aiopt/error.hpp"

namespace aiopt {

inline constexpr std::string_view kMetricCsvHeader = "ts,source,metric,value,unit";

/// Parses one CSV metric record in header order `ts,source,metric,value,unit`.
inline MetricSample parse_metric_csv_line(std::string_view line) {
  const auto fields = csv::split(line);
  if (fields.size() != 5) throw Error(ErrorCode::MalformedRecord, "expected 5 CSV fields");
  MetricSample s;
  std::size_t used = 0;
  try {
    s.timestamp = std::stoll(fields[0], &used);
    if (used != fields[0].size()) throw std::invalid_argument("ts");
    s.value = std::stod(fields[3], &used);
    if (used != fields[3].size()) throw std::invalid_argument("value");
  } catch (const std::exception&) {
    throw Error(ErrorCode::MalformedRecord, "ts must be an integer and value a number");
  }
  s.source = fields[1];
  auto m = metric_from_string(fields[2]);
  if (!m) throw Error(ErrorCode::UnknownMetric, "unknown metric '" + fields[2] + "'");
  s.metric = *m;
  s.unit = fields[4];
  validate(s);
  return s;
}

struct RejectedRecord {
  std::size_t index = 0;  // 1-based line number, or 0-based array index for JSON arrays
  ErrorCode code = ErrorCode::MalformedRecord;
  std::string reason;
};

struct IngestResult {
  std::vector<MetricSample> samples;
  std::vector<RejectedRecord> rejected;
};

enum class MetricFileFormat { JsonLines, Csv };

/// Reads a JSON-Lines or CSV metric stream. CSV is recognized by its header
/// line; blank lines are skipped; bad records are itemized, not fatal.
inline IngestResult read_metrics(std::istream& in) {
  IngestResult out;
  std::string line;
  std::size_t line_no = 0;
  std::optional<MetricFileFormat> format;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!format) {
      if (line == kMetricCsvHeader) {
        format = MetricFileFormat::Csv;
        continue;
      }
      format = MetricFileFormat::JsonLines;
    }
    try {
      out.samples.push_back(*format == MetricFileFormat::Csv ? parse_metric_csv_line(line) : parse_metric_line(line));
    } catch (const Error& e) {
      out.rejected.push_back({line_no, e.code(), e.what()});
    }
  }
  return out;
}

inline IngestResult read_metrics_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open '" + path + "'");
  return read_metrics(in);
}

/// Stable sort by timestamp, preserving arrival order among equal timestamps.
inline std::vector<MetricSample> sorted_by_time(std::vector<MetricSample> samples) {
  std::stable_sort(samples.begin(), samples.end(),
                   [](const MetricSample& a, const MetricSample& b) { return a.timestamp < b.timestamp; });
  return samples;
}

/// Samples in the most recent window: ts in (max_ts - window_ms, max_ts].
inline std::vector<MetricSample> latest_window(const std::vector<MetricSample>& samples, std::int64_t window_ms) {
  if (samples.empty()) return {};
  std::int64_t max_ts = samples.front().timestamp;
  for (const auto& s : samples) max_ts = std::max(max_ts, s.timestamp);
  std::vector<MetricSample> out;
  for (const auto& s : samples)
    if (s.timestamp > max_ts - window_ms) out.push_back(s);
  return out;
}

}  // namespace aiopt
