#pragma once

#include <stdexcept>
#include <string>

namespace crftrack {

enum class ErrorKind {
  kFormat,
  kValidation,
  kNumerical,
  kCapacity,
  kInsufficientHistory,
  kUnsupportedMode,
  kIo,
};

/// Single exception type for the library; `kind()` drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

// 0 success, 2 format/validation, 3 numerical, 4 capacity.
inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kNumerical:
      return 3;
    case ErrorKind::kCapacity:
      return 4;
    default:
      return 2;
  }
}

}  // namespace crftrack
