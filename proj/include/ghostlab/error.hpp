#pragma once

#include <stdexcept>
#include <string>

namespace ghostlab {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter outside the domain of a formula or type invariant.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Factorial/Stirling order beyond the exact-arithmetic guard, or a result
/// that does not fit in a double.
class OrderOverflow : public Error {
 public:
  using Error::Error;
};

/// Monte-Carlo batch whose noise estimate is exactly zero.
class DegenerateBatch : public Error {
 public:
  using Error::Error;
};

class GridTooSmall : public Error {
 public:
  using Error::Error;
};

class InsufficientFrames : public Error {
 public:
  using Error::Error;
};

class EmptyRegion : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated frame-stack file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration document or command-line override.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ghostlab
