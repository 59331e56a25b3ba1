#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tdiff {

enum class ErrorKind {
  InvalidModel,
  NonErgodicModel,
  NumericalBlowup,
  DegenerateSigma,
  InvalidThresholdOrder,
  IndexOutOfRange,
  RegimeStarved,
  QuadratureFailure,
  ConventionViolation,
  FlatLikelihood,
  InvalidArgument,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Exception type for every recoverable failure in the library. The kind is
/// what callers (and the harness failure policy) dispatch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace tdiff
