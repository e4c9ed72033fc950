#pragma once

#include <stdexcept>
#include <string>

namespace gpmala {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The Gram matrix could not be factorized even after the maximum jitter.
class IllConditionedGram : public Error {
 public:
  using Error::Error;
};

/// A Monte-Carlo batch carries no usable likelihood information (mean <= 0).
class DegenerateLikelihood : public Error {
 public:
  using Error::Error;
};

/// A sample set whose covariance cannot be factorized.
class DegenerateSample : public Error {
 public:
  using Error::Error;
};

/// Post-processing a chain left no states.
class InsufficientChain : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace gpmala
