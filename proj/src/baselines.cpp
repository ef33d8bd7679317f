// SPDX-License-Identifier: MIT
#include "tlvar/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tlvar/errors.hpp"
#include "tlvar/linalg.hpp"

namespace tlvar {

namespace {

Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& m, double c) {
    return m.unaryExpr([c](double x) {
        const double mag = std::abs(x) - c;
        return mag > 0.0 ? (x > 0.0 ? mag : -mag) : 0.0;
    });
}

bool kkt_satisfied(const Eigen::MatrixXd& B, const Eigen::MatrixXd& G, double lambda,
                   double tol) {
    for (Eigen::Index j = 0; j < B.cols(); ++j)
        for (Eigen::Index i = 0; i < B.rows(); ++i) {
            const double b = B(i, j), g = G(i, j);
            if (b == 0.0) {
                if (std::abs(g) > lambda + tol) return false;
            } else if (std::abs(g + lambda * (b > 0.0 ? 1.0 : -1.0)) > tol) {
                return false;
            }
        }
    return true;
}

}  // namespace

Tensor3 ols_var(const Panel& panel, Eigen::Index p) {
    LagDesign d = lag_design(panel, p);
    const Eigen::Index N = d.Y.rows(), T = d.Y.cols();
    if (T < N * p)
        throw numerical_error("ols_var: effective sample size " + std::to_string(T) +
                              " is below N*p = " + std::to_string(N * p));
    const Eigen::MatrixXd Sxx = d.X * d.X.transpose();
    const Eigen::MatrixXd Syx = d.Y * d.X.transpose();
    const Eigen::MatrixXd A1 =
        solve_sym_guarded(Sxx, Syx.transpose(), 1e12, "OLS design Gram").transpose();
    return fold(A1, 1, N, N, p);
}

TransferFit pool_var(const std::vector<Panel>& sources, const Panel& target, Eigen::Index p,
                     std::array<Eigen::Index, 3> ranks, const std::vector<double>& weights,
                     const PenaltyConfig& cfg, const InitBundle* init) {
    if (sources.empty()) throw std::invalid_argument("pool_var: no source panels");
    InitOptions opt;
    opt.common_ranks = ranks;
    const InitBundle bundle = init ? *init : initialize_all(sources, p, weights, opt);
    if (bundle.s_ranks != ranks)
        throw std::invalid_argument("pool_var: initialization ranks disagree with requested ranks");

    PenaltyConfig stage1_cfg = cfg;
    stage1_cfg.lambda = {0.0};  // irrelevant with deviations frozen
    stage1_cfg.weights = weights;
    const std::vector<TaskData> tasks = make_task_data(sources, p);
    const Stage1Result s1 =
        stage1_fit(tasks, ranks, stage1_cfg, initial_state(bundle), /*freeze_R=*/true);
    return stage2_fit(target, s1.U, s1.V, s1.L, 0.0, cfg, /*freeze_R=*/true);
}

TransferFit initial_var(const std::vector<Panel>& sources, const Panel& target,
                        Eigen::Index p, double lambda0, const PenaltyConfig& cfg,
                        const InitOptions& opt, const InitBundle* init) {
    if (sources.empty()) throw std::invalid_argument("initial_var: no source panels");
    const InitBundle bundle = init ? *init : initialize_all(sources, p, {}, opt);
    return stage2_fit(target, bundle.U0, bundle.V0, bundle.L0, lambda0, cfg);
}

Tensor3 sparse_var_lasso(const Panel& panel, Eigen::Index p, double lambda, int max_iter) {
    if (lambda < 0.0) throw std::invalid_argument("sparse_var_lasso: lambda must be >= 0");
    if (max_iter < 1) throw std::invalid_argument("sparse_var_lasso: max_iter must be >= 1");
    LagDesign d = lag_design(panel, p);
    const Eigen::Index N = d.Y.rows();
    const double T = static_cast<double>(d.Y.cols());
    const Eigen::MatrixXd Sxx = d.X * d.X.transpose();
    const Eigen::MatrixXd Syx = d.Y * d.X.transpose();
    const double tryy = d.Y.squaredNorm();
    const double eta = T / lambda_max_sym(Sxx, 1e-10);
    constexpr double kKktTol = 1e-6;

    const auto grad = [&](const Eigen::MatrixXd& M) -> Eigen::MatrixXd {
        return (M * Sxx - Syx) / T;
    };
    const auto objective = [&](const Eigen::MatrixXd& M) {
        const double q =
            tryy - 2.0 * M.cwiseProduct(Syx).sum() + (M * Sxx).cwiseProduct(M).sum();
        return std::max(0.0, q) / (2.0 * T) + lambda * M.lpNorm<1>();
    };
    const auto prox_step = [&](const Eigen::MatrixXd& M) {
        return soft_threshold(M - eta * grad(M), eta * lambda);
    };

    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(N, N * p);
    Eigen::MatrixXd Z = B;
    double t = 1.0;
    double f = objective(B);

    for (int it = 0; it < max_iter; ++it) {
        Eigen::MatrixXd cand = prox_step(Z);
        double fc = objective(cand);
        if (fc > f) {
            // Momentum overshot: restart from the last iterate with a plain
            // proximal step, which cannot increase the objective.
            cand = prox_step(B);
            fc = objective(cand);
            t = 1.0;
        }
        if (!std::isfinite(fc))
            throw numerical_error("sparse_var_lasso: objective diverged");
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        Z = cand + ((t - 1.0) / tn) * (cand - B);
        B = std::move(cand);
        t = tn;
        f = fc;
        if (it % 10 == 0 || it == max_iter - 1) {
            if (kkt_satisfied(B, grad(B), lambda, kKktTol)) return fold(B, 1, N, N, p);
        }
    }
    if (kkt_satisfied(B, grad(B), lambda, kKktTol)) return fold(B, 1, N, N, p);
    throw numerical_error("sparse_var_lasso: stationarity conditions not met after " +
                          std::to_string(max_iter) + " iterations");
}

double select_lasso_lambda(const Panel& panel, Eigen::Index p,
                           const std::vector<double>& grid, Eigen::Index holdout_len) {
    if (grid.empty()) throw config_error("lasso selection: empty grid");
    if (holdout_len < 1) throw config_error("lasso selection: holdout length must be >= 1");
    const Eigen::Index total = panel.Y.cols();
    if (total - holdout_len < p + 1)
        throw config_error("lasso selection: holdout leaves too few observations");
    const Eigen::Index N = panel.Y.rows();

    Panel train{panel.id, panel.Y.leftCols(total - holdout_len)};
    std::vector<double> sorted = grid;
    std::sort(sorted.begin(), sorted.end());

    double best_lambda = sorted.front();
    double best_err = std::numeric_limits<double>::infinity();
    for (double lambda : sorted) {
        const Eigen::MatrixXd A1 = matricize(sparse_var_lasso(train, p, lambda), 1);
        double sq = 0.0;
        for (Eigen::Index tpt = total - holdout_len; tpt < total; ++tpt) {
            Eigen::VectorXd x(N * p);
            for (Eigen::Index j = 1; j <= p; ++j)
                x.segment((j - 1) * N, N) = panel.Y.col(tpt - j);
            sq += (panel.Y.col(tpt) - A1 * x).squaredNorm();
        }
        const double err = std::sqrt(sq / static_cast<double>(holdout_len));
        if (err < best_err) {
            best_err = err;
            best_lambda = lambda;
        }
    }
    return best_lambda;
}

}  // namespace tlvar
