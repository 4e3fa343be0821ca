#pragma once

#include <stdexcept>
#include <string>

namespace homest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the physical domain (position, window, interval).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Grid too coarse for the fast scale it is asked to resolve.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Coefficient below its admissible lower bound or otherwise invalid.
class CoefficientError : public Error {
 public:
  using Error::Error;
};

/// Covariance matrix not admissible (nonpositive variances, failed factorization).
class CovarianceError : public Error {
 public:
  using Error::Error;
};

/// Quadrature domain does not capture enough probability mass.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// Periodic problem without a solution (forcing with nonzero mean).
class SolvabilityError : public Error {
 public:
  using Error::Error;
};

/// Caller violated a documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace homest
