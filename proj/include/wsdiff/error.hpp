#pragma once

#include <stdexcept>
#include <string>

namespace wsdiff {

enum class ErrorKind {
  NotPositiveDefinite,
  DimensionMismatch,
  InvalidSize,
  InvalidArgument,
  NegativeTime,
  SingularTime,
  EmptyDataset,
  NoAnalyticScore,
  NonFiniteState,
  RejectionBudgetExceeded,
  OutOfSupport,
  ConvergenceFailure,
  BadPointCount,
  PreconditionViolated,
  ContainmentViolated,
  DimensionTooLarge,
  ParseError,
  IoError,
};

const char* error_name(ErrorKind kind);

// Every failure raised by the library carries one of the kinds above; the
// CLI prints error_name() on stderr and exits nonzero.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_name(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  const char* name() const noexcept { return error_name(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace wsdiff
