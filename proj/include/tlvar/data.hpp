// SPDX-License-Identifier: MIT
//
// CSV ingestion and stationarity transforms for observed panels.
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tlvar/var.hpp"

namespace tlvar {

// Reads a comma-separated file with a header row, time labels in the first
// column, and one variable per remaining column, rows in time order. Leading
// rows with any missing cell (empty, NA, NaN) are trimmed so all variables
// share an aligned start; a missing cell after the first complete row is an
// error, as are ragged or non-numeric rows. The returned panel holds
// variables in rows and time points in columns.
Panel load_csv(const std::string& path);

// Per-variable stationarity transform codes:
//   1 first difference           2 second difference
//   3 log first difference       4 log second difference
struct TransformSpec {
    std::vector<int> codes;
    bool standardize = true;
};

// What preprocess() did, sufficient to map forecasts back to original units.
struct PreprocessInfo {
    std::vector<int> codes;
    Eigen::VectorXd mean;          // standardization offsets (zero when disabled)
    Eigen::VectorXd scale;         // standardization divisors (one when disabled)
    Eigen::Index rows_dropped = 0;  // leading time points consumed by differencing
};

struct PreprocessResult {
    Panel panel;
    PreprocessInfo info;
};

// Applies the per-variable transform, end-aligns all series to the shortest
// transformed length, and standardizes each to sample mean 0 and variance 1
// (n-1 denominator). A constant series transforms to all zeros and is left
// at zero rather than divided by a zero scale. Log codes on non-positive
// values raise a data error naming the offending variable.
PreprocessResult preprocess(const Panel& raw, const TransformSpec& spec);

}  // namespace tlvar
