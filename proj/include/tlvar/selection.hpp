// SPDX-License-Identifier: MIT
//
// Rank selection, subspace aggregation, and hyperparameter schedules: the
// machinery that turns raw source panels into the starting point of the
// alternating representation-learning fit.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <vector>

#include "tlvar/estimator.hpp"
#include "tlvar/tensor.hpp"
#include "tlvar/var.hpp"

namespace tlvar {

// Multilinear low-rank VAR fit by alternating least squares. Factors and the
// core are each updated by exact least squares with the rest held fixed
// (factors re-orthonormalized, cores absorbing the polar part), so the fit
// loss never increases. Initialized from the truncated HOSVD of the OLS
// estimate. Returns the assembled N x N x p transition tensor.
Tensor3 fit_mlr_var(const Panel& panel, Eigen::Index p, std::array<Eigen::Index, 3> ranks,
                    int max_iter = 100, double tol = 1e-8);

// Ridge-type ratio selection of per-mode multilinear ranks from the singular
// values of the OLS estimate's matricizations. r_max < 0 means min(N, 10);
// ridge < 0 means the per-mode default 0.01 * sigma_1 * sqrt(N*p/T).
std::array<Eigen::Index, 3> select_ranks_ridge_ratio(const Panel& panel, Eigen::Index p,
                                                     Eigen::Index r_max = -1,
                                                     double ridge = -1.0);

struct SubspaceAggregate {
    Eigen::VectorXd eigvals;  // descending, clamped to [0, 1]
    Eigen::MatrixXd eigvecs;  // columns aligned with eigvals
};

// Eigen-decomposition of sum_k w_k F_k F_k'. For orthonormal F_k each
// eigenvalue is a weighted average of squared cosines of principal angles,
// hence lands in [0, 1].
SubspaceAggregate aggregate_subspaces(const std::vector<Eigen::MatrixXd>& factors,
                                      const std::vector<double>& weights);

enum class RankRule { threshold, elbow };

// Number of leading eigenvalues to keep: count above tau, or the discrete
// second-difference elbow (zero-padded past the end, smallest index on ties).
// Always returns at least 1.
Eigen::Index select_common_ranks(const Eigen::VectorXd& eigvals, RankRule rule,
                                 double tau = 0.75);

struct InitBundle {
    Eigen::MatrixXd U0, V0, L0;           // orthonormal starting representations
    std::array<Eigen::Index, 3> s_ranks;  // (s1, s2, s3)
    Eigen::VectorXd eigvals_u, eigvals_v, eigvals_l;
    std::vector<std::array<Eigen::Index, 3>> task_ranks;
    std::vector<Tensor3> fitted;  // per-source low-rank fits, N x N x p
    std::vector<Tensor3> D_init;  // fitted tensors projected onto (U0, V0, L0)
    std::vector<double> weights;
};

struct InitOptions {
    Eigen::Index r_max = -1;  // per-mode cap for rank selection; -1 -> min(N, 10)
    std::optional<std::array<Eigen::Index, 3>> task_ranks;    // skip per-task selection
    std::optional<std::array<Eigen::Index, 3>> common_ranks;  // skip aggregation rule
    RankRule rule = RankRule::threshold;
    double tau = 0.75;
    int mlr_max_iter = 100;
    double mlr_tol = 1e-8;
};

// Per-source low-rank fits -> HOSVD factors -> weighted projection
// aggregation -> common ranks and starting representations. Empty weights
// default to effective-sample-size proportions.
InitBundle initialize_all(const std::vector<Panel>& sources, Eigen::Index p,
                          const std::vector<double>& weights = {},
                          const InitOptions& opt = {});

// Starting state for stage1_fit assembled from an initialization bundle
// (deviations at zero).
StageOneState initial_state(const InitBundle& bundle);

// Task weights proportional to T_k (simple) or to T_k over the top noise
// eigenvalue (optimal under heteroscedastic tasks). Both sum to one.
std::vector<double> weights_simple(const std::vector<Eigen::Index>& T);
std::vector<double> weights_optimal(const std::vector<Eigen::Index>& T,
                                    const std::vector<double>& sigma_max);

struct LambdaSchedule {
    double c_S = 1.0, c_T = 1.0;
    std::vector<double> lambda;  // per source task
    double lambda0 = 0.0;        // target task
};

// Deviation penalty levels: lambda_k = c_S * sqrt((N^2 p + N log(N K)) / T_k)
// and lambda0 = c_T * sqrt((N^2 p + N log N) / T0), natural logarithm.
LambdaSchedule lambda_schedule(double c_S, double c_T, Eigen::Index N, Eigen::Index p,
                               const std::vector<Eigen::Index>& T, Eigen::Index T0);

struct ValidationProtocol {
    Eigen::Index p = 1;
    InitOptions init;
    PenaltyConfig cfg;  // lambda/weights/eta are derived, the rest is used as-is
};

// Grid search for the penalty constant: refit the source representations once
// per candidate on training prefixes, roll one-step forecasts across each
// source's holdout with the fitted per-task tensors, and return the candidate
// with the smallest pooled forecast error (smallest value on ties).
double select_c_by_validation(const std::vector<Panel>& sources,
                              const std::vector<double>& c_grid, Eigen::Index holdout_len,
                              const ValidationProtocol& protocol);

}  // namespace tlvar
