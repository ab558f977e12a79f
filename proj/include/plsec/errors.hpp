#pragma once

#include <stdexcept>
#include <string>

namespace plsec {

/// Base for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment or object configuration (dimensions, counts, flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Bit/symbol/frame lengths that do not fit the declared framing.
class FramingError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Operand dimensions disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Channel matrix is rank deficient (Gram matrix too ill-conditioned).
class SingularChannelError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or otherwise malformed numeric input.
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace plsec
