// SPDX-License-Identifier: MIT
#pragma once

#include <Eigen/Dense>

namespace tlvar {

struct SvdResult {
    Eigen::MatrixXd U;   // rows x r
    Eigen::VectorXd s;   // descending, >= 0
    Eigen::MatrixXd V;   // cols x r
};

// Thin SVD truncated to rank r. Sign convention: the largest-magnitude entry
// of each left singular vector is forced nonnegative (ties broken by the
// first index), with the matching flip applied to the right vector, so the
// output is deterministic across backends.
[[nodiscard]] SvdResult truncated_svd(const Eigen::MatrixXd& m, Eigen::Index r);

struct PolarResult {
    Eigen::MatrixXd Q;  // orthonormal columns, span(Q) = span(input)
    Eigen::MatrixXd H;  // symmetric positive definite, input = Q * H
};

// Polar decomposition m = Q H via the SVD. Unique for full column rank, so no
// sign ambiguity at all; throws numerical_error on rank deficiency.
[[nodiscard]] PolarResult polar_factor(const Eigen::MatrixXd& m);

// The orthonormal polar factor alone.
[[nodiscard]] Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& m);

// Largest principal-angle sine between the column spaces of A and B, both
// orthonormal with the same shape: sqrt(1 - sigma_min(B'A)^2), equivalently
// the spectral norm of (I - BB')A. Returns a value in [0, 1].
[[nodiscard]] double sin_theta_distance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// Largest eigenvalue of a symmetric PSD matrix by power iteration with a
// deterministic start vector, to relative tolerance rel_tol.
[[nodiscard]] double lambda_max_sym(const Eigen::MatrixXd& S, double rel_tol = 1e-8);

// Solves M Z = rhs for symmetric positive semidefinite M through its
// eigendecomposition, rejecting condition numbers above cond_limit with a
// numerical_error mentioning `what`. Never forms an explicit inverse.
[[nodiscard]] Eigen::MatrixXd solve_sym_guarded(const Eigen::MatrixXd& M,
                                                const Eigen::MatrixXd& rhs,
                                                double cond_limit = 1e12,
                                                const char* what = "gram system");

// kron(A, B): standard Kronecker product, (i_A, i_B) ordering with the B
// index fastest.
[[nodiscard]] Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

}  // namespace tlvar
