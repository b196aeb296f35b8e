#pragma once

#include <stdexcept>
#include <string>

namespace placing {

// Base class for all toolkit errors so the CLI can map them onto exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input violates a mathematical precondition: near-zero 6D vector, parallel
// Gram-Schmidt columns, isotropic covariance, non-orthonormal matrix.
struct DegenerateInputError : Error {
  using Error::Error;
};

// Classical estimators found nothing above the noise threshold to fit.
struct NoLineFoundError : Error {
  using Error::Error;
};

// Rendered contact footprint misses the taxel array entirely.
struct EmptyContactError : Error {
  using Error::Error;
};

// Checkpoint was written for a different network architecture.
struct FingerprintMismatchError : Error {
  using Error::Error;
};

// NaN loss encountered during optimization; carries the offending batch.
struct TrainingDivergedError : Error {
  TrainingDivergedError(const std::string& msg, int epoch_, int batch_)
      : Error(msg), epoch(epoch_), batch(batch_) {}
  int epoch;
  int batch;
};

struct IoError : Error {
  using Error::Error;
};

struct UsageError : Error {
  using Error::Error;
};

}  // namespace placing
