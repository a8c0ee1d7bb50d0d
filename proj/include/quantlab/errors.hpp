#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace quantlab {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition (bad bit width, K out of range, ...).
class InvalidArgument : public Error {
public:
  using Error::Error;
};

// Filesystem-level failure: open/write/rename.
class IoFailure : public Error {
public:
  using Error::Error;
};

// Dump file header is not a valid QLT1 header.
class MalformedHeader : public Error {
public:
  using Error::Error;
};

// Dump payload size disagrees with the declared shape.
class ShapeMismatch : public Error {
public:
  using Error::Error;
};

// A NaN/Inf was found where only finite values are admitted.
class NonFiniteValue : public Error {
public:
  NonFiniteValue(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

private:
  std::size_t index_;
};

// Percentile calibration hit an all-zero threshold; caller picks the fallback.
class DegenerateScale : public Error {
public:
  using Error::Error;
};

class InvalidK : public InvalidArgument {
public:
  using InvalidArgument::InvalidArgument;
};

class PolicyLengthMismatch : public InvalidArgument {
public:
  using InvalidArgument::InvalidArgument;
};

class InsufficientRows : public InvalidArgument {
public:
  using InvalidArgument::InvalidArgument;
};

class ZeroVariance : public Error {
public:
  using Error::Error;
};

// The collapse-experiment probe system is rank deficient / degenerate.
class SingularProbe : public Error {
public:
  using Error::Error;
};

}  // namespace quantlab
