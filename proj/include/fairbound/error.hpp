#pragma once

#include <stdexcept>
#include <string>

namespace fairbound {

enum class ErrorKind {
  kValidation,
  kMissingColumn,
  kEmptyEvent,
  kEmptyGroup,
  kDegenerateProxy,
  kDegenerateVariance,
  kInsufficientLabels,
  kUnresolvableRecord,
  kSingularMatrix,
  kNonFinite,
  kUnsupported,
  kIo,
};

const char* to_string(ErrorKind kind);

/// Every recoverable failure in the library is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace fairbound
