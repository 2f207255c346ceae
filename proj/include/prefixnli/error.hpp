#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prefixnli {

enum class ErrorCode {
  // usage
  InvalidArgument,
  InvalidConfig,
  // data
  IndexOutOfRange,
  InconsistentVerdict,
  MultiEditRejected,
  SchemaMismatch,
  ParseError,
  IoError,
  MissingScore,
  EmptyCandidates,
  EmptyInput,
  EmptySummary,
  RecordOutOfRange,
  IncompleteTrace,
  UnknownPrefix,
  // backend
  Transport,
  Timeout,
  MalformedResponse,
  OutOfRange,
};

enum class ErrorCategory { Usage, Data, Backend };

constexpr ErrorCategory category_of(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidConfig:
      return ErrorCategory::Usage;
    case ErrorCode::Transport:
    case ErrorCode::Timeout:
    case ErrorCode::MalformedResponse:
    case ErrorCode::OutOfRange:
      return ErrorCategory::Backend;
    default:
      return ErrorCategory::Data;
  }
}

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InconsistentVerdict: return "InconsistentVerdict";
    case ErrorCode::MultiEditRejected: return "MultiEditRejected";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MissingScore: return "MissingScore";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptySummary: return "EmptySummary";
    case ErrorCode::RecordOutOfRange: return "RecordOutOfRange";
    case ErrorCode::IncompleteTrace: return "IncompleteTrace";
    case ErrorCode::UnknownPrefix: return "UnknownPrefix";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::OutOfRange: return "OutOfRange";
  }
  return "Unknown";
}

constexpr std::string_view to_string(ErrorCategory cat) noexcept {
  switch (cat) {
    case ErrorCategory::Usage: return "usage";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Backend: return "backend";
  }
  return "unknown";
}

/// Every failure raised by the library carries a code; the CLI maps the
/// code's category onto its exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace prefixnli
