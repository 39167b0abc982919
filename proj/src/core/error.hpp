#pragma once

#include <stdexcept>
#include <string>

namespace egopnr {

enum class ErrorKind {
  InvalidArgument,
  Parse,
  Validation,
  Io,
  Format,
  Numeric,
  Contract,
};

// All core operations report failures by throwing Error. The C API layer
// translates the kind into a status code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace egopnr
