#pragma once

#include <stdexcept>
#include <string>

namespace stable {

enum class ErrorKind {
  InvalidArgument,
  DimensionNotImplemented,
  Singularity,
  NoDensity,
  Degenerate,
  GridTooCoarse,
  QuadratureFailure,
  BudgetExhausted,
  Precondition,
  Io,
  Config,
};

const char* to_string(ErrorKind kind);

/// Exception carrying a machine-checkable failure category.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace stable
