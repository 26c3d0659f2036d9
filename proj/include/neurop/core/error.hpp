#pragma once

#include <stdexcept>
#include <string>

namespace neurop {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible extents between operands or against a declared layout.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside its documented domain.
class ValueError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a blown-up solve/training run.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Misuse of a differentiation tape (e.g. a second backward pass).
class TapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable binary artifact.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace neurop
