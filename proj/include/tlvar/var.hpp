// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tlvar/tensor.hpp"

namespace tlvar {

// One task's observed series. Columns are time points; the first p columns
// act as presample values for a VAR(p) fit, so Y has T + p columns for an
// effective sample of size T. Variable names are optional (loaded data keeps
// its CSV headers; simulated data leaves them empty).
struct Panel {
    std::string id;
    Eigen::MatrixXd Y;
    std::vector<std::string> names;
};

// VAR(p) process y_t = A_1 y_{t-1} + ... + A_p y_{t-p} + eps_t. The lag
// matrices are stored as the N x N x p tensor A whose mode-1 matricization is
// the horizontal stack (A_1, ..., A_p).
struct VarProcess {
    Eigen::Index N = 0;
    Eigen::Index p = 0;
    Tensor3 A;
    Eigen::MatrixXd noise_cov;  // symmetric positive definite
};

// Np x Np block companion matrix: (A_1, ..., A_p) in the first block row,
// identity blocks on the subdiagonal.
[[nodiscard]] Eigen::MatrixXd companion_matrix(const Tensor3& A);

[[nodiscard]] double spectral_radius(const Eigen::MatrixXd& M);

// True iff the companion spectral radius is < 1 - margin.
[[nodiscard]] bool is_stationary(const Tensor3& A, double margin = 0.0);

// Simulates burn_in + T + p steps from a zero initial state with Gaussian
// innovations, discards the burn-in and returns the final T + p columns.
// Deterministic for a fixed seed.
[[nodiscard]] Panel simulate(const VarProcess& proc, Eigen::Index T, Eigen::Index burn_in,
                             std::uint64_t seed);

struct LagDesign {
    Eigen::MatrixXd Y;  // N x T responses
    Eigen::MatrixXd X;  // Np x T stacked lags; column t is (y_{t-1}', ..., y_{t-p}')'
};

// Builds the regression pair so that Y = A_(1) X holds exactly for noiseless
// data from A.
[[nodiscard]] LagDesign lag_design(const Panel& panel, Eigen::Index p);

constexpr Eigen::Index kDefaultBurnIn = 200;

}  // namespace tlvar
