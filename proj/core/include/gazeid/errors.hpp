#pragma once

#include <stdexcept>
#include <string>

namespace gazeid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument is outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a structural invariant (malformed texts, scanpaths, files).
class CorpusError : public Error {
 public:
  using Error::Error;
};

/// A saccade type cannot occur at the given position (e.g. next word after the last word).
class StructuralInfeasibility : public Error {
 public:
  using Error::Error;
};

/// A truncation interval carries zero probability mass under a density.
class InfeasibleTruncation : public Error {
 public:
  using Error::Error;
};

/// Parameter estimation could not produce a fit (too few or degenerate samples).
class FitError : public Error {
 public:
  using Error::Error;
};

/// Linear algebra or quadrature failed numerically.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Model or config file could not be read.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace gazeid
