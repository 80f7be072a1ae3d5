#pragma once

#include <stdexcept>
#include <string>

namespace dift {

// Shape or axis mismatch in tensor operations.
struct DimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or unreadable input data (files, landmark rows, headers).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite loss or other numeric breakdown.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dift
