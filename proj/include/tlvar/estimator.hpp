// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "tlvar/tensor.hpp"
#include "tlvar/var.hpp"

namespace tlvar {

// Lagged regression view of one task: Y (N x T) responses, X (Np x T) stacked
// lag design.
struct TaskData {
    Eigen::MatrixXd Y;
    Eigen::MatrixXd X;
};

[[nodiscard]] std::vector<TaskData> make_task_data(const std::vector<Panel>& panels,
                                                   Eigen::Index p);

// Joint optimization state over the shared factors and per-task blocks.
// During iteration U, V, L are free matrices; the fitting routines
// orthonormalize them (with cores counter-rotated) before returning.
struct StageOneState {
    Eigen::MatrixXd U, V, L;
    std::vector<Tensor3> D;  // cores, s1 x s2 x s3
    std::vector<Tensor3> R;  // deviations, N x N x p
    int iterations = 0;
};

struct PenaltyConfig {
    std::vector<double> lambda;   // per task; a single entry broadcasts
    std::vector<double> weights;  // simplex; empty = proportional to T_k
    double a = 1.0;               // orthogonality regularizer strength
    double b = 1.0;               // target scale of the factor Grams
    std::vector<double> eta;      // per-task step sizes; empty = T_k / lambda_max(X_k X_k')
    int max_outer = 200;
    int max_inner = 50;
    double tol = 1e-6;            // relative objective-change stopping rule
};

// (1/2T) ||Y - A_(1) X||_F^2.
[[nodiscard]] double ols_loss(const Tensor3& A, const Eigen::MatrixXd& Y,
                              const Eigen::MatrixXd& X);

// Gradient of ols_loss in A; its mode-1 matricization is -(1/T)(Y - A_(1)X)X'.
[[nodiscard]] Tensor3 ols_loss_gradient(const Tensor3& A, const Eigen::MatrixXd& Y,
                                        const Eigen::MatrixXd& X);

// Frobenius-norm shrinkage: (1 - c/||A||_F)_+ A.
[[nodiscard]] Tensor3 prox_frobenius(const Tensor3& A, double c);

// T / lambda_max(X X'), the inverse Lipschitz constant of the loss gradient.
[[nodiscard]] double step_size(const Eigen::MatrixXd& X, Eigen::Index T);

// One proximal gradient step on the deviation: prox_{eta*lambda}(R - eta * g)
// where g is the loss gradient at low_rank_part + R.
[[nodiscard]] Tensor3 prox_update_R(const Tensor3& R, const Tensor3& low_rank_part,
                                    const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X,
                                    double eta, double lambda);

// Weighted task losses at ([[D_k; U, V, L]] + R_k) plus the orthogonality
// regularizer (a/4) sum_F ||F'F - b^2 I||_F^2 over F in {U, V, L}.
[[nodiscard]] double rl_objective(const StageOneState& state, const std::vector<TaskData>& tasks,
                                  const PenaltyConfig& cfg);

struct RlGradients {
    Eigen::MatrixXd U, V, L;
    std::vector<Tensor3> D;
};

[[nodiscard]] RlGradients rl_gradients(const StageOneState& state,
                                       const std::vector<TaskData>& tasks,
                                       const PenaltyConfig& cfg);

struct Stage1Result {
    Eigen::MatrixXd U, V, L;             // orthonormal
    StageOneState state;                 // cores counter-rotated to match
    std::vector<double> objective_trace; // penalized objective per outer iteration
};

// Alternating scheme: proximal steps on each R_k, then joint descent of
// rl_objective over (U, V, L, {D_k}) with Armijo backtracking. The penalized
// objective sum_k w_k [loss_k + lambda_k ||R_k||_F] never increases across
// outer iterations (1e-8 slack guarded). freeze_R pins every deviation at its
// initial value, which realizes the lambda = infinity pooling limit.
[[nodiscard]] Stage1Result stage1_fit(const std::vector<TaskData>& tasks,
                                      std::array<Eigen::Index, 3> ranks,
                                      const PenaltyConfig& cfg, const StageOneState& init,
                                      bool freeze_R = false);

// Exact minimizer of the target loss over the core given fixed deviation and
// orthonormal representations:
//   D_(1) = [U'(Y - R_(1)X)X'(L (x) V)] [(L (x) V)'XX'(L (x) V)]^{-1}.
[[nodiscard]] Tensor3 closed_form_D0(const Eigen::MatrixXd& Y0, const Eigen::MatrixXd& X0,
                                     const Tensor3& R0, const Eigen::MatrixXd& U,
                                     const Eigen::MatrixXd& V, const Eigen::MatrixXd& L);

struct TransferFit {
    Eigen::MatrixXd U, V, L;
    Tensor3 D0, R0;
    Tensor3 A0;  // [[D0; U, V, L]] + R0
    std::vector<double> objective_trace;
    int iterations = 0;
};

// Target-stage alternation: proximal step on R0, closed-form core update.
// The order p is read off L's row count. freeze_R keeps R0 = 0 (pooling).
[[nodiscard]] TransferFit stage2_fit(const Panel& target, const Eigen::MatrixXd& U,
                                     const Eigen::MatrixXd& V, const Eigen::MatrixXd& L,
                                     double lambda0, const PenaltyConfig& cfg,
                                     bool freeze_R = false);

}  // namespace tlvar
