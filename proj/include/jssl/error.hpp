#pragma once

#include <stdexcept>
#include <string>

namespace jssl {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid arguments, configurations or setup/data combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File system and serialization failures. The message names the path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or divergence during a computation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace jssl
