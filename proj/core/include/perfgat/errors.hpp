#pragma once

#include <stdexcept>

namespace perfgat {

// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree.
struct DimensionError : Error {
  using Error::Error;
};

// Input outside an operation's mathematical domain (empty softmax,
// zero-norm cosine, degenerate series, duplicate centroids, ...).
struct DomainError : Error {
  using Error::Error;
};

// A call contract was violated (non-scalar backward output, asymmetric
// adjacency where a symmetric one is required, ...).
struct ContractError : Error {
  using Error::Error;
};

// Invalid configuration value or unknown configuration key.
struct ConfigError : Error {
  using Error::Error;
};

// Missing, malformed or incompatible on-disk data.
struct DataError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required, or a diverging
// optimization.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace perfgat
