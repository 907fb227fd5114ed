#pragma once

#include <stdexcept>
#include <string>

namespace stgp {

// Error taxonomy. The CLI maps these onto exit codes (see commands.hpp).

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A sampler was started from a state its contract does not accept.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Factorization or iteration failure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Problem size over a configured cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Configuration schema violation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace stgp
