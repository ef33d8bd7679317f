// SPDX-License-Identifier: MIT
#include "tlvar/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "tlvar/errors.hpp"

namespace tlvar {

namespace {

// Force the largest-magnitude entry of each column of U nonnegative,
// mirroring the flip onto V so the product is unchanged.
void apply_sign_rule(Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
    for (Eigen::Index j = 0; j < U.cols(); ++j) {
        Eigen::Index at = 0;
        U.col(j).cwiseAbs().maxCoeff(&at);
        if (U(at, j) < 0.0) {
            U.col(j) = -U.col(j);
            if (j < V.cols()) V.col(j) = -V.col(j);
        }
    }
}

}  // namespace

SvdResult truncated_svd(const Eigen::MatrixXd& m, Eigen::Index r) {
    if (r < 1 || r > std::min(m.rows(), m.cols()))
        throw std::invalid_argument("truncated_svd: rank out of range");
    // BDC degrades to Jacobi internally below its blocking threshold; both are
    // deterministic for a fixed input.
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::MatrixXd U = svd.matrixU();
    Eigen::MatrixXd V = svd.matrixV();
    apply_sign_rule(U, V);
    SvdResult out;
    out.U = U.leftCols(r);
    out.s = svd.singularValues().head(r);
    out.V = V.leftCols(r);
    return out;
}

PolarResult polar_factor(const Eigen::MatrixXd& m) {
    if (m.cols() > m.rows())
        throw std::invalid_argument("polar_factor: more columns than rows");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double smax = s.size() ? s(0) : 0.0;
    const double tiny = static_cast<double>(std::max(m.rows(), m.cols())) *
                        std::numeric_limits<double>::epsilon() * smax;
    if (smax == 0.0 || s(s.size() - 1) <= tiny)
        throw numerical_error("polar_factor: input is numerically rank deficient");
    PolarResult out;
    out.Q = svd.matrixU() * svd.matrixV().transpose();
    out.H = svd.matrixV() * s.asDiagonal() * svd.matrixV().transpose();
    return out;
}

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& m) { return polar_factor(m).Q; }

double sin_theta_distance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.rows() != B.rows() || A.cols() != B.cols())
        throw std::invalid_argument("sin_theta_distance: shapes must match");
    const auto check_orth = [](const Eigen::MatrixXd& M, const char* name) {
        const Eigen::MatrixXd G = M.transpose() * M;
        const double dev =
            (G - Eigen::MatrixXd::Identity(M.cols(), M.cols())).cwiseAbs().maxCoeff();
        if (dev > 1e-8)
            throw std::invalid_argument(std::string("sin_theta_distance: ") + name +
                                        " is not orthonormal (deviation " + std::to_string(dev) +
                                        ")");
    };
    check_orth(A, "first argument");
    check_orth(B, "second argument");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(B.transpose() * A);
    const double cos_min = svd.singularValues().minCoeff();
    const double s2 = std::max(0.0, 1.0 - cos_min * cos_min);
    return std::min(1.0, std::sqrt(s2));
}

double lambda_max_sym(const Eigen::MatrixXd& S, double rel_tol) {
    if (S.rows() != S.cols()) throw std::invalid_argument("lambda_max_sym: matrix must be square");
    const Eigen::Index n = S.rows();
    if (n == 1) return S(0, 0);
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n).normalized();
    double lam = 0.0;
    for (int it = 0; it < 100000; ++it) {
        Eigen::VectorXd w = S * v;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;  // v in the null space and S PSD with ones-vector start
        v = w / norm;
        const double lam_new = v.dot(S * v);
        if (std::abs(lam_new - lam) <= rel_tol * std::max(1.0, std::abs(lam_new))) return lam_new;
        lam = lam_new;
    }
    return lam;
}

Eigen::MatrixXd solve_sym_guarded(const Eigen::MatrixXd& M, const Eigen::MatrixXd& rhs,
                                  double cond_limit, const char* what) {
    if (M.rows() != M.cols() || M.rows() != rhs.rows())
        throw std::invalid_argument("solve_sym_guarded: shape mismatch");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.info() != Eigen::Success)
        throw numerical_error(std::string("solve_sym_guarded: eigensolver failed for ") + what);
    const Eigen::VectorXd& ev = es.eigenvalues();  // ascending
    const double lmax = ev(ev.size() - 1);
    const double lmin = ev(0);
    if (lmax <= 0.0 || lmin <= lmax / cond_limit)
        throw numerical_error(std::string("ill-conditioned ") + what + ": lambda_min=" +
                              std::to_string(lmin) + ", lambda_max=" + std::to_string(lmax));
    return es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
           (es.eigenvectors().transpose() * rhs);
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    Eigen::MatrixXd out(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index j = 0; j < A.cols(); ++j)
        for (Eigen::Index i = 0; i < A.rows(); ++i)
            out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return out;
}

}  // namespace tlvar
