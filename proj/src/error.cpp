#include "tdiff/error.hpp"

namespace tdiff {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidModel: return "InvalidModel";
    case ErrorKind::NonErgodicModel: return "NonErgodicModel";
    case ErrorKind::NumericalBlowup: return "NumericalBlowup";
    case ErrorKind::DegenerateSigma: return "DegenerateSigma";
    case ErrorKind::InvalidThresholdOrder: return "InvalidThresholdOrder";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::RegimeStarved: return "RegimeStarved";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::ConventionViolation: return "ConventionViolation";
    case ErrorKind::FlatLikelihood: return "FlatLikelihood";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace tdiff
