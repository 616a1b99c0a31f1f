#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sim2real {

enum class ErrorCode {
  kInvalidPose,
  kNonInvertible,
  kDegenerateIntrinsics,
  kInvalidControl,
  kUnknownCategory,
  kEmptyMap,
  kUnknownConvention,
  kParse,
  kValidation,
  kConventionMismatch,
  kRankDeficient,
  kInsufficientData,
  kMissingInput,
  kIdMismatch,
  kInvalidArgument,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidPose: return "invalid-pose";
    case ErrorCode::kNonInvertible: return "non-invertible";
    case ErrorCode::kDegenerateIntrinsics: return "degenerate-intrinsics";
    case ErrorCode::kInvalidControl: return "invalid-control";
    case ErrorCode::kUnknownCategory: return "unknown-category";
    case ErrorCode::kEmptyMap: return "empty-map";
    case ErrorCode::kUnknownConvention: return "unknown-convention";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kConventionMismatch: return "convention-mismatch";
    case ErrorCode::kRankDeficient: return "rank-deficient";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kMissingInput: return "missing-input";
    case ErrorCode::kIdMismatch: return "id-mismatch";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
  }
  return "unknown";
}

/// Every failure raised by the toolkit carries one of the codes above so
/// callers (the CLI in particular) can map failure classes to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A dataset line that failed to parse or validate. `line` is 1-based.
class LineError : public Error {
 public:
  LineError(ErrorCode code, std::size_t line, const std::string& what)
      : Error(code, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace sim2real
