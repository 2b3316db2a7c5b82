#include "popdyn/error.hpp"

namespace popdyn {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimensionMismatch:
      return "dimension mismatch";
    case ErrorKind::kInvalidArgument:
      return "invalid argument";
    case ErrorKind::kDomain:
      return "domain error";
    case ErrorKind::kMissingCapability:
      return "missing capability";
    case ErrorKind::kNonConvergence:
      return "non-convergence";
    case ErrorKind::kConfig:
      return "config error";
    case ErrorKind::kNumerical:
      return "numerical error";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, std::string(to_string(kind)) + ": " + message);
}

}  // namespace popdyn
