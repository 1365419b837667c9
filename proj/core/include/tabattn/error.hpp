#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tabattn {

enum class ErrorKind {
  Shape,
  Domain,
  Parameter,
  Parse,
  Format,
  Schema,
  Lookup,
  State,
  DegenerateCohort,
  Io,
  Version,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Single exception type for the library; callers branch on kind().
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

}  // namespace tabattn
