#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flab {

enum class ErrorKind {
  InvalidInput,
  Dimension,
  Domain,
  Unsupported,
  Numerical,
  Divergence,
  Config,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

/// Single exception type for the library; `kind()` tells callers (and the CLI's
/// exit-code mapping) which contract was broken.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Numerical failures (divergence, non-convergence) as opposed to bad input.
  bool is_numerical() const noexcept {
    return kind_ == ErrorKind::Numerical || kind_ == ErrorKind::Divergence;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace flab
