// SPDX-License-Identifier: MIT
#include "tlvar/var.hpp"

#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "tlvar/errors.hpp"
#include "tlvar/rng.hpp"

namespace tlvar {

Eigen::MatrixXd companion_matrix(const Tensor3& A) {
    const Eigen::Index N = A.d1(), p = A.d3();
    if (A.d2() != N) throw std::invalid_argument("companion_matrix: tensor must be N x N x p");
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(N * p, N * p);
    C.topRows(N) = matricize(A, 1);  // (A_1, ..., A_p)
    for (Eigen::Index j = 0; j + 1 < p; ++j)
        C.block((j + 1) * N, j * N, N, N).setIdentity();
    return C;
}

double spectral_radius(const Eigen::MatrixXd& M) {
    if (M.rows() != M.cols()) throw std::invalid_argument("spectral_radius: square matrix needed");
    Eigen::EigenSolver<Eigen::MatrixXd> es(M, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_stationary(const Tensor3& A, double margin) {
    return spectral_radius(companion_matrix(A)) < 1.0 - margin;
}

Panel simulate(const VarProcess& proc, Eigen::Index T, Eigen::Index burn_in, std::uint64_t seed) {
    const Eigen::Index N = proc.N, p = proc.p;
    if (T < 1) throw std::invalid_argument("simulate: T must be >= 1");
    if (burn_in < 0) throw std::invalid_argument("simulate: burn_in must be >= 0");
    if (proc.A.d1() != N || proc.A.d2() != N || proc.A.d3() != p)
        throw std::invalid_argument("simulate: coefficient tensor shape mismatch");
    if (!is_stationary(proc.A))
        throw numerical_error("simulate: refusing to simulate a non-stationary process");

    Eigen::LLT<Eigen::MatrixXd> llt(proc.noise_cov);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("simulate: noise covariance is not positive definite");
    const Eigen::MatrixXd chol = llt.matrixL();

    const Eigen::MatrixXd A1 = matricize(proc.A, 1);  // N x Np
    const Eigen::Index total = burn_in + T + p;
    Eigen::MatrixXd traj(N, total);
    Rng rng(seed);
    Eigen::VectorXd z(N);
    for (Eigen::Index t = 0; t < total; ++t) {
        Eigen::VectorXd y = Eigen::VectorXd::Zero(N);
        for (Eigen::Index j = 1; j <= p; ++j) {
            if (t - j < 0) continue;  // zero initial state
            y += A1.middleCols((j - 1) * N, N) * traj.col(t - j);
        }
        for (Eigen::Index i = 0; i < N; ++i) z(i) = rng.normal();
        traj.col(t) = y + chol * z;
    }
    Panel out;
    out.Y = traj.rightCols(T + p);
    return out;
}

LagDesign lag_design(const Panel& panel, Eigen::Index p) {
    const Eigen::Index N = panel.Y.rows();
    const Eigen::Index total = panel.Y.cols();
    if (p < 1) throw std::invalid_argument("lag_design: p must be >= 1");
    if (total <= p)
        throw std::invalid_argument("lag_design: panel needs more than p columns");
    const Eigen::Index T = total - p;
    LagDesign d;
    d.Y = panel.Y.rightCols(T);
    d.X.resize(N * p, T);
    for (Eigen::Index t = 0; t < T; ++t)
        for (Eigen::Index j = 1; j <= p; ++j)
            d.X.block((j - 1) * N, t, N, 1) = panel.Y.col(p + t - j);
    return d;
}

}  // namespace tlvar
