// SPDX-License-Identifier: MIT
#pragma once

#include <stdexcept>

namespace tlvar {

// Malformed experiment configuration (unknown keys, missing files, bad grids).
// The CLI maps this to exit code 1.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unusable input data: ragged CSV rows, interior gaps, log transforms of
// non-positive series. Exit code 2.
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A computation that cannot proceed numerically: singular Gram matrices,
// rank-deficient factors, diverging iterations. Exit code 3.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace tlvar
