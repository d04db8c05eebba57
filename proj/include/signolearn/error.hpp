#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace signolearn {

enum class ErrorCode {
  // numerical
  NonPositiveInput,
  Overflow,
  NonFiniteGradient,
  NonFiniteObjective,
  NonFiniteLoss,
  ZeroVariance,
  AllRestartsFailed,
  NonPositiveScore,
  ZeroComponentScore,
  MixedSignComponent,
  // structural / configuration
  DimensionMismatch,
  NameCountMismatch,
  InvalidConfig,
  EmptyBatch,
  NotBinary,
  LengthMismatch,
  InvalidRange,
  NonPositiveScale,
  SameClass,
  IndexOutOfRange,
  // data
  EmptyData,
  MissingColumn,
  ParseError,
  EmptyFile,
  ClassTooSmall,
  SchemaVersionMismatch,
  CorruptFile,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::AllRestartsFailed: return "AllRestartsFailed";
    case ErrorCode::NonPositiveScore: return "NonPositiveScore";
    case ErrorCode::ZeroComponentScore: return "ZeroComponentScore";
    case ErrorCode::MixedSignComponent: return "MixedSignComponent";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NameCountMismatch: return "NameCountMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::NotBinary: return "NotBinary";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::NonPositiveScale: return "NonPositiveScale";
    case ErrorCode::SameClass: return "SameClass";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Broad failure class, used by the CLI to pick an exit code.
enum class ErrorKind { Numerical, Usage, Data };

inline ErrorKind kind_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::Overflow:
    case ErrorCode::NonFiniteGradient:
    case ErrorCode::NonFiniteObjective:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::ZeroVariance:
    case ErrorCode::AllRestartsFailed:
    case ErrorCode::NonPositiveScore:
    case ErrorCode::ZeroComponentScore:
    case ErrorCode::MixedSignComponent:
      return ErrorKind::Numerical;
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NameCountMismatch:
    case ErrorCode::InvalidConfig:
    case ErrorCode::NotBinary:
    case ErrorCode::InvalidRange:
    case ErrorCode::NonPositiveScale:
    case ErrorCode::SameClass:
    case ErrorCode::IndexOutOfRange:
      return ErrorKind::Usage;
    default:
      return ErrorKind::Data;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        index_(index) {}

  ErrorCode code() const noexcept { return code_; }
  /// Offending term, row, epoch or parameter index when one applies.
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
};

}  // namespace signolearn
