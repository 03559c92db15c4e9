// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace csimap {

// Error taxonomy mirrors the CLI exit codes: config 2, data 3, numerical 4.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments, detected before any heavy compute.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed or inconsistent input data (files, records, shapes).
struct DataError : Error {
    using Error::Error;
};

// Numerical failure: divergence, non-convergence, degenerate inputs.
struct NumericalError : Error {
    using Error::Error;
};

} // namespace csimap
