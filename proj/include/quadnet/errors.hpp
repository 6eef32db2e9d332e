#pragma once

#include <stdexcept>
#include <string>

namespace quadnet {

enum class ErrorCode {
  NoAdmissibleRoot,
  EdgeDetectionFailed,
  EigenFailure,
  FormMismatch,
  NoConvergence,
  OutOfRange,
  Diverged,
  DimensionOverflow,
  NotReached,
  InvalidArgument,
};

const char* to_string(ErrorCode code);

// Numerical or contract failure raised by the library. The code lets callers
// (sweeps, the CLI) record the failure kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoAdmissibleRoot: return "NoAdmissibleRoot";
    case ErrorCode::EdgeDetectionFailed: return "EdgeDetectionFailed";
    case ErrorCode::EigenFailure: return "EigenFailure";
    case ErrorCode::FormMismatch: return "FormMismatch";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::DimensionOverflow: return "DimensionOverflow";
    case ErrorCode::NotReached: return "NotReached";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace quadnet
