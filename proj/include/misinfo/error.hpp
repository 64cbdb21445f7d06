#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace misinfo {

enum class ErrorCode {
  OutOfOrder,
  PhaseViolation,
  UnknownClaim,
  UnknownSession,
  StageViolation,
  MissingSlots,
  EmptyAttributes,
  ProviderError,
  EmptyAnswers,
  MalformedTable,
  DatasetTooSmall,
  EmptySelection,
  DegenerateSample,
  InsufficientData,
  EmptyText,
  ScorerUnavailable,
  GroupTooSmall,
  EngineUnavailable,
  ParseError,
  DuplicateId,
  BindError,
  CorruptLog,
  ConfigError,
  AlreadyExists,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfOrder: return "OutOfOrder";
    case ErrorCode::PhaseViolation: return "PhaseViolation";
    case ErrorCode::UnknownClaim: return "UnknownClaim";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::StageViolation: return "StageViolation";
    case ErrorCode::MissingSlots: return "MissingSlots";
    case ErrorCode::EmptyAttributes: return "EmptyAttributes";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::EmptyAnswers: return "EmptyAnswers";
    case ErrorCode::MalformedTable: return "MalformedTable";
    case ErrorCode::DatasetTooSmall: return "DatasetTooSmall";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::ScorerUnavailable: return "ScorerUnavailable";
    case ErrorCode::GroupTooSmall: return "GroupTooSmall";
    case ErrorCode::EngineUnavailable: return "EngineUnavailable";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::BindError: return "BindError";
    case ErrorCode::CorruptLog: return "CorruptLog";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::AlreadyExists: return "AlreadyExists";
  }
  return "Unknown";
}

inline std::optional<ErrorCode> parse_error_code(std::string_view name) {
  for (int i = 0; i <= int(ErrorCode::AlreadyExists); ++i)
    if (to_string(ErrorCode(i)) == name) return ErrorCode(i);
  return std::nullopt;
}

/// Every failure in the library is reported as an Error carrying a closed
/// error code; `detail` holds machine-readable context (line numbers, counts).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string detail = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string message_;
  std::string detail_;
};

}  // namespace misinfo
