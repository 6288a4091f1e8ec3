#pragma once

#include <stdexcept>
#include <string>

namespace hiersearch {

enum class ErrorKind {
  kIo,
  kFormat,
  kDimension,
  kValidation,
  kConfig,
  kInsufficientData,
  kNumerical,
  kQuery,
  kEmptyResult,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace hiersearch
