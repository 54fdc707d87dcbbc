#pragma once

#include <stdexcept>
#include <string>

namespace tonematch {

// Malformed inputs: bad files, shape mismatches, violated preconditions.
// The CLI maps this family to exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric failures: solver non-convergence, non-finite values mid-compute.
// The CLI maps this family to exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tonematch
