#include "fairbound/error.hpp"

namespace fairbound {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kMissingColumn: return "missing-column";
    case ErrorKind::kEmptyEvent: return "empty-event";
    case ErrorKind::kEmptyGroup: return "empty-group";
    case ErrorKind::kDegenerateProxy: return "degenerate-proxy";
    case ErrorKind::kDegenerateVariance: return "degenerate-variance";
    case ErrorKind::kInsufficientLabels: return "insufficient-labels";
    case ErrorKind::kUnresolvableRecord: return "unresolvable-record";
    case ErrorKind::kSingularMatrix: return "singular-matrix";
    case ErrorKind::kNonFinite: return "non-finite";
    case ErrorKind::kUnsupported: return "unsupported";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace fairbound
