#pragma once

#include <stdexcept>
#include <string>

namespace e2bows {

// Error taxonomy shared by the whole library. The C API maps each type to a
// status code; the CLI maps all of them to exit code 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A caller-supplied value violates a precondition (bad range, duplicate id, ...).
struct ArgumentError : Error {
  using Error::Error;
};

// Tensor/vector shapes do not line up.
struct DimensionError : Error {
  using Error::Error;
};

// A file does not match its declared on-disk format.
struct FormatError : Error {
  using Error::Error;
};

// A computation produced NaN/Inf or an internal consistency check failed.
struct NumericError : Error {
  using Error::Error;
};

// Filesystem-level failure (open, read, write).
struct IoError : Error {
  using Error::Error;
};

}  // namespace e2bows
