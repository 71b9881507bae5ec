#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gfock {

enum class ErrorKind {
  ZeroDivisor,
  OutOfWindow,
  OutOfTable,
  WrongPreset,
  UnstableStep,
  ZeroPhi,
  NotAProbability,
  NonDiagonal,
  ConstraintViolation,
  PhaseMismatch,
  NonpositiveMuGamma,
  ZeroPrior,
  InvalidArgument,
  ConfigError,
  IoError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ZeroDivisor: return "ZeroDivisor";
    case ErrorKind::OutOfWindow: return "OutOfWindow";
    case ErrorKind::OutOfTable: return "OutOfTable";
    case ErrorKind::WrongPreset: return "WrongPreset";
    case ErrorKind::UnstableStep: return "UnstableStep";
    case ErrorKind::ZeroPhi: return "ZeroPhi";
    case ErrorKind::NotAProbability: return "NotAProbability";
    case ErrorKind::NonDiagonal: return "NonDiagonalA";
    case ErrorKind::ConstraintViolation: return "ConstraintViolation";
    case ErrorKind::PhaseMismatch: return "PhaseMismatch";
    case ErrorKind::NonpositiveMuGamma: return "NonpositiveMuGamma";
    case ErrorKind::ZeroPrior: return "ZeroPrior";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the ErrorKind tags.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace gfock
