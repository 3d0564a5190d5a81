#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aiopt {

enum class ErrorCode {
  MalformedRecord,
  ValidationFailure,
  UnknownMetric,
  IncompleteWindow,
  WindowTooSmall,
  EmptyWindow,
  PercentileOutOfRange,
  UnsortedStream,
  EpisodeExhausted,
  IndexOutOfRange,
  UnknownRecommendation,
  AlreadyResolved,
  EmptySeries,
  UnsupportedFormat,
  ShapeMismatch,
  InvalidConfig,
  UnknownAction,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::ValidationFailure: return "ValidationFailure";
    case ErrorCode::UnknownMetric: return "UnknownMetric";
    case ErrorCode::IncompleteWindow: return "IncompleteWindow";
    case ErrorCode::WindowTooSmall: return "WindowTooSmall";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::PercentileOutOfRange: return "PercentileOutOfRange";
    case ErrorCode::UnsortedStream: return "UnsortedStream";
    case ErrorCode::EpisodeExhausted: return "EpisodeExhausted";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::UnknownRecommendation: return "UnknownRecommendation";
    case ErrorCode::AlreadyResolved: return "AlreadyResolved";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::UnknownAction: return "UnknownAction";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above so that
// adapters (CLI exit codes, HTTP statuses) can map them without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace aiopt
