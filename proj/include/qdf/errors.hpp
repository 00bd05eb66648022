#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qdf {

enum class ErrorKind {
  InvalidDimension,
  Conditioning,
  EmptyInput,
  Numeric,
  InvalidSplit,
  InsufficientData,
  Io,
  Parse,
  Spec,
  UndefinedCorrelation,
  Usage,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidDimension: return "invalid_dimension";
    case ErrorKind::Conditioning: return "conditioning";
    case ErrorKind::EmptyInput: return "empty_input";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::InvalidSplit: return "invalid_split";
    case ErrorKind::InsufficientData: return "insufficient_data";
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Spec: return "spec";
    case ErrorKind::UndefinedCorrelation: return "undefined_correlation";
    case ErrorKind::Usage: return "usage";
  }
  return "unknown";
}

/// Single exception type for the library; `kind()` drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace qdf
