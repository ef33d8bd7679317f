// SPDX-License-Identifier: MIT
//
// Comparator estimators: unrestricted OLS, exact-transfer pooling, the
// initializer-only transfer fit, and the l1-penalized VAR.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "tlvar/estimator.hpp"
#include "tlvar/selection.hpp"
#include "tlvar/tensor.hpp"
#include "tlvar/var.hpp"

namespace tlvar {

// Unrestricted least-squares VAR estimate. Refuses short samples (effective
// T < N*p) and ill-conditioned designs instead of resorting to
// pseudo-inverses; callers treat the failure as a recorded outcome.
Tensor3 ols_var(const Panel& panel, Eigen::Index p);

// Exact transfer: shared representations estimated with every deviation
// frozen at zero (the infinite-penalty limit), then the target core fit the
// same way. The returned tensor has exact multilinear ranks <= `ranks`.
// Pass a precomputed initialization bundle to share it across fits; its
// common ranks must agree with `ranks`.
TransferFit pool_var(const std::vector<Panel>& sources, const Panel& target, Eigen::Index p,
                     std::array<Eigen::Index, 3> ranks, const std::vector<double>& weights,
                     const PenaltyConfig& cfg, const InitBundle* init = nullptr);

// Transfer fit that skips the joint refinement stage entirely: the aggregated
// initial representations are used as-is for the target fit.
TransferFit initial_var(const std::vector<Panel>& sources, const Panel& target,
                        Eigen::Index p, double lambda0, const PenaltyConfig& cfg,
                        const InitOptions& opt = {}, const InitBundle* init = nullptr);

// l1-penalized VAR by accelerated proximal gradient with function restarts;
// the result satisfies the lasso KKT conditions within 1e-6.
Tensor3 sparse_var_lasso(const Panel& panel, Eigen::Index p, double lambda,
                         int max_iter = 200000);

// Holdout grid search for the lasso level: fit each candidate on the training
// prefix, roll one-step forecasts across the holdout, return the candidate
// with the smallest pooled error (smallest value on ties).
double select_lasso_lambda(const Panel& panel, Eigen::Index p,
                           const std::vector<double>& grid, Eigen::Index holdout_len);

}  // namespace tlvar
