// SPDX-License-Identifier: MIT
#include <doctest.h>

#include <cmath>
#include <vector>

#include "tlvar/baselines.hpp"
#include "tlvar/errors.hpp"
#include "tlvar/linalg.hpp"
#include "tlvar/rng.hpp"
#include "tlvar/selection.hpp"
#include "tlvar/sim_design.hpp"

using namespace tlvar;

namespace {

Panel noisy_panel(const Tensor3& A, Eigen::Index T, std::uint64_t seed) {
    VarProcess proc;
    proc.N = A.d1();
    proc.p = A.d3();
    proc.A = A;
    proc.noise_cov = Eigen::MatrixXd::Identity(A.d1(), A.d1());
    return simulate(proc, T, 200, seed);
}

// The companion radius is not linear in the coefficient scale when p > 1, so
// shrink geometrically until the radius first drops below the target.
Tensor3 shrunk_random(Rng& rng, Eigen::Index N, Eigen::Index p, double rho) {
    Tensor3 A(N, N, p);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()(i) = rng.normal();
    while (spectral_radius(companion_matrix(A)) > rho) A *= 0.9;
    return A;
}

// Reference coordinate descent for (1/2T)||Y - B X||_F^2 + lambda * ||B||_1,
// swept to a tight fixed point.
Eigen::MatrixXd lasso_cd(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X, double lambda,
                         int sweeps = 20000, double tol = 1e-13) {
    const Eigen::Index T = Y.cols();
    const Eigen::MatrixXd Sxx = X * X.transpose();
    const Eigen::MatrixXd Syx = Y * X.transpose();
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(Y.rows(), X.rows());
    const double thresh = lambda * static_cast<double>(T);
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index i = 0; i < B.rows(); ++i)
            for (Eigen::Index j = 0; j < B.cols(); ++j) {
                const double corr =
                    Syx(i, j) - B.row(i).dot(Sxx.col(j)) + B(i, j) * Sxx(j, j);
                const double z = std::abs(corr) > thresh
                                     ? (corr > 0 ? corr - thresh : corr + thresh) / Sxx(j, j)
                                     : 0.0;
                max_change = std::max(max_change, std::abs(z - B(i, j)));
                B(i, j) = z;
            }
        if (max_change < tol) break;
    }
    return B;
}

}  // namespace

TEST_CASE("unrestricted least squares matches the normal equations") {
    Rng rng(101);
    const Eigen::Index N = 4, p = 2, T = 90;
    const Panel pan = noisy_panel(shrunk_random(rng, N, p, 0.5), T, 401);
    const Tensor3 est = ols_var(pan, p);
    const LagDesign d = lag_design(pan, p);
    const Eigen::MatrixXd want =
        ((d.X * d.X.transpose()).ldlt().solve(d.X * d.Y.transpose())).transpose();
    CHECK((matricize(est, 1) - want).norm() <= 1e-8 * (1.0 + want.norm()));
}

TEST_CASE("least squares refuses under-determined samples") {
    Rng rng(102);
    Panel pan;
    pan.Y = rng.gaussian(6, 10);  // T_eff = 9 < N*p = 6*2
    CHECK_THROWS_AS((void)ols_var(pan, 2), numerical_error);
}

TEST_CASE("pooled fit shares representations and keeps deviations at zero") {
    SimDesign d;
    d.K = 3;
    d.N = 8;
    d.p = 1;
    d.s1 = 3;
    d.s2 = 3;
    d.s3 = 1;
    d.h = 0.0;
    d.T0 = 80;
    d.T_src = 200;
    d.seed = 15;
    const DesignDraw draw = generate_design(d);
    const Panel target = simulate(draw.procs[0], d.T0, 200, derive_seed(d.seed, 99, 0));
    std::vector<Panel> sources;
    for (int k = 1; k <= d.K; ++k)
        sources.push_back(simulate(draw.procs[static_cast<std::size_t>(k)], d.T_src, 200,
                                   derive_seed(d.seed, 99, static_cast<std::uint64_t>(k))));

    const std::array<Eigen::Index, 3> ranks = {3, 3, 1};
    PenaltyConfig cfg;
    const TransferFit fit = pool_var(sources, target, d.p, ranks, {}, cfg);
    CHECK(fit.R0.frobenius_norm() == 0.0);
    CHECK(fit.U.rows() == 8);
    CHECK(fit.U.cols() == 3);
    CHECK((fit.A0 - tucker_product(fit.D0, fit.U, fit.V, fit.L)).frobenius_norm() <= 1e-12);

    // On a clean shared design the pooled estimate beats plain least squares
    // on the short target sample.
    const Tensor3 ols = ols_var(target, d.p);
    const double pool_err = (fit.A0 - draw.tasks[0].A).frobenius_norm();
    const double ols_err = (ols - draw.tasks[0].A).frobenius_norm();
    CHECK(pool_err < ols_err);

    // A precomputed bundle gives the identical result.
    InitOptions io;
    io.common_ranks = ranks;
    const InitBundle bundle = initialize_all(sources, d.p, {}, io);
    const TransferFit again = pool_var(sources, target, d.p, ranks, {}, cfg, &bundle);
    CHECK((again.A0 - fit.A0).frobenius_norm() == 0.0);

    // Rank mismatch between bundle and request is rejected.
    CHECK_THROWS_AS((void)pool_var(sources, target, d.p, {2, 2, 1}, {}, cfg, &bundle),
                    std::invalid_argument);
}

TEST_CASE("initialization-only fit refits the target on the aggregated representations") {
    SimDesign d;
    d.K = 3;
    d.N = 6;
    d.p = 1;
    d.s1 = 2;
    d.s2 = 2;
    d.s3 = 1;
    d.h = 0.25;
    d.T0 = 70;
    d.T_src = 150;
    d.seed = 16;
    const DesignDraw draw = generate_design(d);
    const Panel target = simulate(draw.procs[0], d.T0, 200, derive_seed(d.seed, 99, 0));
    std::vector<Panel> sources;
    for (int k = 1; k <= d.K; ++k)
        sources.push_back(simulate(draw.procs[static_cast<std::size_t>(k)], d.T_src, 200,
                                   derive_seed(d.seed, 99, static_cast<std::uint64_t>(k))));

    PenaltyConfig cfg;
    InitOptions io;
    io.common_ranks = std::array<Eigen::Index, 3>{2, 2, 1};
    const TransferFit fit = initial_var(sources, target, d.p, 0.3, cfg, io);
    CHECK(fit.A0.d1() == 6);
    CHECK(fit.A0.d3() == 1);
    CHECK((fit.A0 - tucker_product(fit.D0, fit.U, fit.V, fit.L) - fit.R0).frobenius_norm() <=
          1e-12);
    // Deterministic across calls.
    const TransferFit again = initial_var(sources, target, d.p, 0.3, cfg, io);
    CHECK((again.A0 - fit.A0).frobenius_norm() == 0.0);
}

TEST_CASE("lasso: a penalty above the correlation scale forces the zero solution") {
    Rng rng(103);
    const Eigen::Index N = 3, p = 1, T = 60;
    const Panel pan = noisy_panel(shrunk_random(rng, N, p, 0.4), T, 402);
    const LagDesign d = lag_design(pan, p);
    const double lambda_null =
        (d.Y * d.X.transpose()).cwiseAbs().maxCoeff() / static_cast<double>(d.Y.cols());
    const Tensor3 est = sparse_var_lasso(pan, p, lambda_null * 1.000001);
    CHECK(est.frobenius_norm() == 0.0);
}

TEST_CASE("lasso solution matches coordinate descent and satisfies the optimality conditions") {
    Rng rng(104);
    for (int rep = 0; rep < 5; ++rep) {
        const Eigen::Index N = 4, p = 2, T = 150;
        const Panel pan = noisy_panel(shrunk_random(rng, N, p, 0.5), T,
                                      500 + static_cast<std::uint64_t>(rep));
        const LagDesign d = lag_design(pan, p);
        const double lmax =
            (d.Y * d.X.transpose()).cwiseAbs().maxCoeff() / static_cast<double>(d.Y.cols());
        const double lambda = 0.2 * lmax;

        const Tensor3 est = sparse_var_lasso(pan, p, lambda);
        const Eigen::MatrixXd B = matricize(est, 1);
        const Eigen::MatrixXd ref = lasso_cd(d.Y, d.X, lambda);
        CHECK((B - ref).cwiseAbs().maxCoeff() <= 1e-5 * std::max(1.0, ref.cwiseAbs().maxCoeff()));

        // First-order conditions at the returned point.
        const Eigen::MatrixXd G =
            (B * (d.X * d.X.transpose()) - d.Y * d.X.transpose()) / static_cast<double>(d.Y.cols());
        for (Eigen::Index i = 0; i < B.rows(); ++i)
            for (Eigen::Index j = 0; j < B.cols(); ++j) {
                if (B(i, j) == 0.0)
                    CHECK(std::abs(G(i, j)) <= lambda + 1e-6);
                else
                    CHECK(std::abs(G(i, j) + lambda * (B(i, j) > 0 ? 1.0 : -1.0)) <= 1e-6);
            }
        // Some but not all coefficients survive at this penalty level.
        CHECK(B.cwiseAbs().maxCoeff() > 0.0);
    }
}

TEST_CASE("lasso rejects bad penalties and impossible shapes") {
    Rng rng(105);
    const Panel pan = noisy_panel(shrunk_random(rng, 3, 1, 0.4), 50, 403);
    CHECK_THROWS_AS((void)sparse_var_lasso(pan, 1, -0.1), std::invalid_argument);
    CHECK_THROWS_AS((void)sparse_var_lasso(pan, 0, 0.1), std::invalid_argument);
}

TEST_CASE("lasso penalty selection picks a grid member by holdout forecasting") {
    Rng rng(106);
    const Panel pan = noisy_panel(shrunk_random(rng, 4, 1, 0.5), 120, 404);
    const std::vector<double> grid = {0.01, 0.05, 0.2, 0.8};
    const double chosen = select_lasso_lambda(pan, 1, grid, 20);
    CHECK(std::count(grid.begin(), grid.end(), chosen) == 1);
    CHECK(chosen == select_lasso_lambda(pan, 1, grid, 20));

    CHECK_THROWS_AS((void)select_lasso_lambda(pan, 1, {}, 20), config_error);
    CHECK_THROWS_AS((void)select_lasso_lambda(pan, 1, grid, pan.Y.cols() - 1), config_error);
}
