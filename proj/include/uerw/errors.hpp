#pragma once

#include <stdexcept>
#include <string>

namespace uerw {

/// Base of every error the library throws for bad input or numeric trouble.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Result not representable as a finite double.
class OverflowError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A documented precondition of an analysis routine does not hold.
class PreconditionError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Too few usable replicas or checkpoints for an estimator.
class InsufficientDataError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Invalid command line or configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A run would exceed its configured memory budget.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Broken internal invariant (e.g. incremental weights drifted).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace uerw
