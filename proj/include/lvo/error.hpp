#pragma once

#include <stdexcept>
#include <string>

namespace lvo {

// Failure classes. The CLI maps each to its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file or config contents.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Raster, tensor or sequence dimensions that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace lvo
