// SPDX-License-Identifier: MIT
//
// Estimation and forecast-accuracy metrics, and the fixed-start rolling
// forecast loop.
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "tlvar/tensor.hpp"
#include "tlvar/var.hpp"

namespace tlvar {

// Frobenius distance between an estimated and a true transition tensor.
double rmse_tensor(const Tensor3& estimate, const Tensor3& truth);

// Produces the mode-1 transition matrix (N x Np) from a training panel.
using FitFunction = std::function<Eigen::MatrixXd(const Panel& train)>;

enum class RefitPolicy {
    per_origin,  // refit on the expanding window before every forecast
    none,        // fit once on the pre-test window and reuse
};

struct ForecastRecord {
    Eigen::Index origin = 0;  // column index of the forecast target
    bool ok = false;
    Eigen::VectorXd error;  // realized minus predicted, when ok
    std::string message;    // failure reason otherwise
};

// One-step-ahead forecasts of the last test_len columns. The training window
// always starts at column 0 and grows with the origin (fixed starting point).
// Fit failures are recorded per origin rather than thrown.
std::vector<ForecastRecord> rolling_forecast(const Panel& data, Eigen::Index p,
                                             const FitFunction& fit, Eigen::Index test_len,
                                             RefitPolicy policy = RefitPolicy::per_origin);

// sqrt(mean over successful origins of the squared error norm). NaN when no
// origin succeeded.
double rmsfe(const std::vector<ForecastRecord>& records);

// Mean absolute error over all (variable, successful origin) pairs.
double mafe(const std::vector<ForecastRecord>& records);

}  // namespace tlvar
