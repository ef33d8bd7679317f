// SPDX-License-Identifier: MIT
#include "tlvar/selection.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "tlvar/errors.hpp"
#include "tlvar/linalg.hpp"

namespace tlvar {

namespace {

struct Gram {
    Eigen::MatrixXd Sxx, Syx;
    double tryy = 0.0;
    Eigen::Index T = 0;
};

Gram make_gram(const Panel& panel, Eigen::Index p) {
    LagDesign d = lag_design(panel, p);
    Gram g;
    g.Sxx = d.X * d.X.transpose();
    g.Syx = d.Y * d.X.transpose();
    g.tryy = d.Y.squaredNorm();
    g.T = d.Y.cols();
    return g;
}

double gram_loss(const Eigen::MatrixXd& B1, const Gram& g) {
    const double q = g.tryy - 2.0 * (B1.cwiseProduct(g.Syx)).sum() +
                     (B1 * g.Sxx).cwiseProduct(B1).sum();
    return std::max(0.0, q) / (2.0 * static_cast<double>(g.T));
}

// OLS transition estimate from the Grams; falls back to a tiny ridge when the
// design Gram is numerically singular (short samples).
Eigen::MatrixXd ols_mode1(const Gram& g) {
    try {
        return solve_sym_guarded(g.Sxx, g.Syx.transpose(), 1e12, "OLS design Gram")
            .transpose();
    } catch (const numerical_error&) {
        const Eigen::Index n = g.Sxx.rows();
        const double delta = 1e-8 * g.Sxx.trace() / static_cast<double>(n);
        if (!(delta > 0.0)) throw;
        const Eigen::MatrixXd ridged =
            g.Sxx + delta * Eigen::MatrixXd::Identity(n, n);
        return solve_sym_guarded(ridged, g.Syx.transpose(), 1e14, "ridged OLS design Gram")
            .transpose();
    }
}

// Exact core update: least squares over D with the factors fixed.
Tensor3 core_update(const Gram& g, const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
                    const Eigen::MatrixXd& L) {
    const Eigen::MatrixXd KLV = kron(L, V);
    const Eigen::MatrixXd M = KLV.transpose() * g.Sxx * KLV;
    const Eigen::MatrixXd B = U.transpose() * g.Syx * KLV;
    const Eigen::MatrixXd D1 =
        solve_sym_guarded(M, B.transpose(), 1e12, "core normal equations").transpose();
    return fold(D1, 1, U.cols(), V.cols(), L.cols());
}

Eigen::Block<const Eigen::MatrixXd> lag_block(const Eigen::MatrixXd& Sxx, Eigen::Index N,
                                              Eigen::Index r, Eigen::Index s) {
    return Sxx.block(r * N, s * N, N, N);
}

}  // namespace

Tensor3 fit_mlr_var(const Panel& panel, Eigen::Index p, std::array<Eigen::Index, 3> ranks,
                    int max_iter, double tol) {
    const Eigen::Index N = panel.Y.rows();
    const auto [r1, r2, r3] = ranks;
    if (r1 < 1 || r1 > N || r2 < 1 || r2 > N || r3 < 1 || r3 > p)
        throw std::invalid_argument("fit_mlr_var: ranks must satisfy 1 <= r1,r2 <= N, 1 <= r3 <= p");
    // No tensor has multilinear ranks violating r_i <= r_j * r_k, and the ALS
    // block Grams are structurally singular for such requests.
    if (r1 > r2 * r3 || r2 > r1 * r3 || r3 > r1 * r2)
        throw std::invalid_argument("fit_mlr_var: infeasible multilinear ranks (r_i <= r_j * r_k)");
    if (max_iter < 0 || tol < 0.0)
        throw std::invalid_argument("fit_mlr_var: max_iter and tol must be >= 0");
    const Gram g = make_gram(panel, p);
    if (g.T < N * p)
        std::cerr << "fit_mlr_var: effective sample size " << g.T << " below N*p = " << N * p
                  << "; estimates may be unstable\n";

    // Start from the best multilinear-rank approximation of the OLS fit.
    TuckerFactors f = hosvd(fold(ols_mode1(g), 1, N, N, p), r1, r2, r3);
    Eigen::MatrixXd U = f.U, V = f.V, L = f.L;
    Tensor3 D = f.core;

    const auto loss = [&]() {
        return gram_loss(U * matricize(D, 1) * kron(L, V).transpose(), g);
    };
    double prev = loss();

    for (int it = 0; it < max_iter; ++it) {
        // U block: exact least squares, then re-orthonormalize and push the
        // polar part into the core so the assembled tensor is unchanged.
        {
            const Eigen::MatrixXd KLV = kron(L, V);
            const Eigen::MatrixXd D1 = matricize(D, 1);
            const Eigen::MatrixXd P = KLV * D1.transpose();  // Np x r1
            const Eigen::MatrixXd M = P.transpose() * g.Sxx * P;
            const Eigen::MatrixXd B = g.Syx * P;
            U = solve_sym_guarded(M, B.transpose(), 1e12, "U-block normal equations")
                    .transpose();
            const PolarResult pr = polar_factor(U);
            U = pr.Q;
            D = mode_product(D, pr.H, 1);
        }

        // V block: normal equations over vec(V'), column-major so the r2
        // coordinate varies fastest. Slice j of the core pairs with the
        // lag-combination z_{t,j} = sum_r L(r,j) y_{t-r}.
        {
            const Eigen::Index n = N * r2;
            Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
            std::vector<Eigen::MatrixXd> slices(static_cast<std::size_t>(r3));
            for (Eigen::Index j = 0; j < r3; ++j) {
                slices[static_cast<std::size_t>(j)] = Eigen::MatrixXd(r1, r2);
                for (Eigen::Index a = 0; a < r1; ++a)
                    for (Eigen::Index b = 0; b < r2; ++b)
                        slices[static_cast<std::size_t>(j)](a, b) = D(a, b, j);
            }
            for (Eigen::Index j = 0; j < r3; ++j) {
                for (Eigen::Index l = 0; l < r3; ++l) {
                    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(N, N);
                    for (Eigen::Index r = 0; r < p; ++r)
                        for (Eigen::Index s = 0; s < p; ++s)
                            Z += L(r, j) * L(s, l) * lag_block(g.Sxx, N, r, s);
                    const Eigen::MatrixXd DjDl =
                        slices[static_cast<std::size_t>(j)].transpose() *
                        slices[static_cast<std::size_t>(l)];
                    M += kron(Z, DjDl);
                }
                Eigen::MatrixXd C = Eigen::MatrixXd::Zero(N, N);
                for (Eigen::Index r = 0; r < p; ++r)
                    C += L(r, j) * g.Syx.block(0, r * N, N, N);
                const Eigen::MatrixXd block =
                    slices[static_cast<std::size_t>(j)].transpose() * U.transpose() * C;
                rhs += Eigen::Map<const Eigen::VectorXd>(block.data(), n);
            }
            const Eigen::VectorXd w =
                solve_sym_guarded(M, rhs, 1e12, "V-block normal equations");
            V = Eigen::Map<const Eigen::MatrixXd>(w.data(), r2, N).transpose();
            const PolarResult pr = polar_factor(V);
            V = pr.Q;
            D = mode_product(D, pr.H, 2);
        }

        // L block: least squares over the lag weights; absent when p = 1
        // because L is then the fixed 1x1 identity.
        if (p > 1) {
            const Eigen::Index n = p * r3;
            Eigen::MatrixXd M(n, n);
            Eigen::VectorXd rhs(n);
            std::vector<Eigen::MatrixXd> slices(static_cast<std::size_t>(r3));
            for (Eigen::Index j = 0; j < r3; ++j) {
                Eigen::MatrixXd Dj(r1, r2);
                for (Eigen::Index a = 0; a < r1; ++a)
                    for (Eigen::Index b = 0; b < r2; ++b) Dj(a, b) = D(a, b, j);
                slices[static_cast<std::size_t>(j)] = Dj;
            }
            for (Eigen::Index j = 0; j < r3; ++j) {
                const Eigen::MatrixXd UDj = U * slices[static_cast<std::size_t>(j)];
                for (Eigen::Index r = 0; r < p; ++r) {
                    Eigen::MatrixXd C = g.Syx.block(0, r * N, N, N);
                    rhs(r + p * j) = (V * UDj.transpose() * C).trace();
                    for (Eigen::Index l = 0; l < r3; ++l) {
                        const Eigen::MatrixXd Mjl =
                            V * slices[static_cast<std::size_t>(j)].transpose() *
                            slices[static_cast<std::size_t>(l)] * V.transpose();
                        for (Eigen::Index s = 0; s < p; ++s)
                            M(r + p * j, s + p * l) =
                                (Mjl * lag_block(g.Sxx, N, s, r)).trace();
                    }
                }
            }
            const Eigen::VectorXd w =
                solve_sym_guarded(M, rhs, 1e12, "L-block normal equations");
            L = Eigen::Map<const Eigen::MatrixXd>(w.data(), p, r3);
            const PolarResult pr = polar_factor(L);
            L = pr.Q;
            D = mode_product(D, pr.H, 3);
        }

        D = core_update(g, U, V, L);

        const double cur = loss();
        if (cur > prev + 1e-8 * std::max(1.0, std::abs(prev)))
            throw numerical_error("fit_mlr_var: loss increased at iteration " +
                                  std::to_string(it + 1));
        if (std::abs(prev - cur) <= tol * std::max(1.0, std::abs(prev))) {
            prev = cur;
            break;
        }
        prev = cur;
    }

    return tucker_product(D, U, V, L);
}

std::array<Eigen::Index, 3> select_ranks_ridge_ratio(const Panel& panel, Eigen::Index p,
                                                     Eigen::Index r_max, double ridge) {
    const Eigen::Index N = panel.Y.rows();
    const Gram g = make_gram(panel, p);
    const Tensor3 est = fold(ols_mode1(g), 1, N, N, p);
    if (est.frobenius_norm() <= 0.0)
        throw data_error("rank selection: transition estimate is identically zero");
    if (r_max == 0 || r_max < -1)
        throw std::invalid_argument("select_ranks_ridge_ratio: r_max must be positive or -1");
    const Eigen::Index cap = r_max < 0 ? std::min<Eigen::Index>(N, 10) : r_max;

    std::array<Eigen::Index, 3> out{};
    const std::array<Eigen::Index, 3> dims{N, N, p};
    for (int mode = 1; mode <= 3; ++mode) {
        const Eigen::MatrixXd m = matricize(est, mode);
        Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
        const Eigen::VectorXd& sv = svd.singularValues();
        const double rdg = ridge < 0.0
                               ? 0.01 * sv(0) *
                                     std::sqrt(static_cast<double>(N * p) /
                                               static_cast<double>(g.T))
                               : ridge;
        // Ratios are taken between consecutive observed singular values only;
        // a one-dimensional spectrum (or r_max = 1) forces rank one.
        const Eigen::Index hi =
            std::min({cap, dims[static_cast<std::size_t>(mode - 1)], sv.size() - 1});
        Eigen::Index best = 1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 1; i <= hi; ++i) {
            const double denom = sv(i - 1) + rdg;
            if (denom <= 0.0) break;  // exhausted spectrum and no ridge
            const double ratio = (sv(i) + rdg) / denom;
            if (ratio < best_ratio) {
                best_ratio = ratio;
                best = i;
            }
        }
        out[static_cast<std::size_t>(mode - 1)] = best;
    }
    // The per-mode picks can be jointly infeasible (any multilinear rank
    // triple satisfies r_i <= r_j * r_k; a mode-3 rank of 1, say, forces equal
    // mode-1 and mode-2 ranks). Clamp down to the largest feasible triple
    // dominated by the picks; the loop decreases monotonically, so it stops.
    for (bool changed = true; changed;) {
        changed = false;
        for (int i = 0; i < 3; ++i) {
            const Eigen::Index other = out[(i + 1) % 3] * out[(i + 2) % 3];
            if (out[static_cast<std::size_t>(i)] > other) {
                out[static_cast<std::size_t>(i)] = other;
                changed = true;
            }
        }
    }
    return out;
}

SubspaceAggregate aggregate_subspaces(const std::vector<Eigen::MatrixXd>& factors,
                                      const std::vector<double>& weights) {
    if (factors.empty()) throw std::invalid_argument("aggregate_subspaces: no factors");
    if (factors.size() != weights.size())
        throw std::invalid_argument("aggregate_subspaces: factor/weight count mismatch");
    const Eigen::Index n = factors.front().rows();
    double wsum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("aggregate_subspaces: negative weight");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-6)
        throw std::invalid_argument("aggregate_subspaces: weights must sum to 1");

    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < factors.size(); ++k) {
        if (factors[k].rows() != n)
            throw std::invalid_argument("aggregate_subspaces: row dimension mismatch");
        S += weights[k] * factors[k] * factors[k].transpose();
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    if (es.info() != Eigen::Success)
        throw numerical_error("aggregate_subspaces: eigen-decomposition failed");

    SubspaceAggregate out;
    out.eigvals = es.eigenvalues().reverse();
    out.eigvecs = es.eigenvectors().rowwise().reverse();
    for (Eigen::Index i = 0; i < out.eigvals.size(); ++i)
        out.eigvals(i) = std::clamp(out.eigvals(i), 0.0, 1.0);
    // Deterministic signs: largest-magnitude entry of each eigenvector
    // nonnegative, first index on ties.
    for (Eigen::Index j = 0; j < out.eigvecs.cols(); ++j) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < out.eigvecs.rows(); ++i) {
            const double a = std::abs(out.eigvecs(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (out.eigvecs(arg, j) < 0.0) out.eigvecs.col(j) = -out.eigvecs.col(j);
    }
    return out;
}

Eigen::Index select_common_ranks(const Eigen::VectorXd& eigvals, RankRule rule, double tau) {
    const Eigen::Index n = eigvals.size();
    if (n == 0) throw std::invalid_argument("select_common_ranks: empty eigenvalue list");
    for (Eigen::Index i = 0; i + 1 < n; ++i)
        if (eigvals(i) < eigvals(i + 1) - 1e-10)
            throw std::invalid_argument("select_common_ranks: eigenvalues must be descending");

    if (rule == RankRule::threshold) {
        Eigen::Index count = 0;
        while (count < n && eigvals(count) > tau) ++count;
        return std::max<Eigen::Index>(1, count);
    }

    const auto at = [&](Eigen::Index i) { return i < n ? eigvals(i) : 0.0; };
    Eigen::Index best = 1;
    double best_curv = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double curv = at(i) - 2.0 * at(i + 1) + at(i + 2);
        if (curv > best_curv) {
            best_curv = curv;
            best = i + 1;
        }
    }
    return best;
}

InitBundle initialize_all(const std::vector<Panel>& sources, Eigen::Index p,
                          const std::vector<double>& weights, const InitOptions& opt) {
    if (sources.empty()) throw std::invalid_argument("initialize_all: no source panels");
    const Eigen::Index N = sources.front().Y.rows();
    for (const auto& s : sources)
        if (s.Y.rows() != N)
            throw std::invalid_argument("initialize_all: sources must share the series count");

    InitBundle b;
    if (weights.empty()) {
        std::vector<Eigen::Index> T;
        T.reserve(sources.size());
        for (const auto& s : sources) T.push_back(s.Y.cols() - p);
        b.weights = weights_simple(T);
    } else {
        if (weights.size() != sources.size())
            throw std::invalid_argument("initialize_all: weight count mismatch");
        b.weights = weights;
    }

    std::vector<Eigen::MatrixXd> us, vs, ls;
    for (std::size_t k = 0; k < sources.size(); ++k) {
        const std::array<Eigen::Index, 3> rk =
            opt.task_ranks ? *opt.task_ranks
                           : select_ranks_ridge_ratio(sources[k], p, opt.r_max);
        b.task_ranks.push_back(rk);
        b.fitted.push_back(
            fit_mlr_var(sources[k], p, rk, opt.mlr_max_iter, opt.mlr_tol));
        TuckerFactors f = hosvd(b.fitted.back(), rk[0], rk[1], rk[2]);
        us.push_back(std::move(f.U));
        vs.push_back(std::move(f.V));
        ls.push_back(std::move(f.L));
    }

    const SubspaceAggregate au = aggregate_subspaces(us, b.weights);
    const SubspaceAggregate av = aggregate_subspaces(vs, b.weights);
    const SubspaceAggregate al = aggregate_subspaces(ls, b.weights);
    b.eigvals_u = au.eigvals;
    b.eigvals_v = av.eigvals;
    b.eigvals_l = al.eigvals;

    if (opt.common_ranks) {
        b.s_ranks = *opt.common_ranks;
        if (b.s_ranks[0] < 1 || b.s_ranks[0] > N || b.s_ranks[1] < 1 || b.s_ranks[1] > N ||
            b.s_ranks[2] < 1 || b.s_ranks[2] > p)
            throw std::invalid_argument("initialize_all: fixed common ranks out of range");
    } else {
        b.s_ranks = {select_common_ranks(au.eigvals, opt.rule, opt.tau),
                     select_common_ranks(av.eigvals, opt.rule, opt.tau),
                     select_common_ranks(al.eigvals, opt.rule, opt.tau)};
    }

    b.U0 = au.eigvecs.leftCols(b.s_ranks[0]);
    b.V0 = av.eigvecs.leftCols(b.s_ranks[1]);
    b.L0 = al.eigvecs.leftCols(b.s_ranks[2]);
    for (const auto& fit : b.fitted)
        b.D_init.push_back(
            tucker_product(fit, b.U0.transpose(), b.V0.transpose(), b.L0.transpose()));
    return b;
}

StageOneState initial_state(const InitBundle& bundle) {
    StageOneState st;
    st.U = bundle.U0;
    st.V = bundle.V0;
    st.L = bundle.L0;
    st.D = bundle.D_init;
    const Eigen::Index N = bundle.U0.rows(), p = bundle.L0.rows();
    st.R.assign(bundle.D_init.size(), Tensor3(N, N, p));
    return st;
}

std::vector<double> weights_simple(const std::vector<Eigen::Index>& T) {
    if (T.empty()) throw std::invalid_argument("weights_simple: empty sample-size list");
    double total = 0.0;
    for (Eigen::Index t : T) {
        if (t <= 0) throw std::invalid_argument("weights_simple: sample sizes must be positive");
        total += static_cast<double>(t);
    }
    std::vector<double> w;
    w.reserve(T.size());
    for (Eigen::Index t : T) w.push_back(static_cast<double>(t) / total);
    return w;
}

std::vector<double> weights_optimal(const std::vector<Eigen::Index>& T,
                                    const std::vector<double>& sigma_max) {
    if (T.empty() || T.size() != sigma_max.size())
        throw std::invalid_argument("weights_optimal: size mismatch");
    double total = 0.0;
    std::vector<double> w;
    w.reserve(T.size());
    for (std::size_t k = 0; k < T.size(); ++k) {
        if (T[k] <= 0 || sigma_max[k] <= 0.0)
            throw std::invalid_argument("weights_optimal: inputs must be positive");
        w.push_back(static_cast<double>(T[k]) / sigma_max[k]);
        total += w.back();
    }
    for (double& x : w) x /= total;
    return w;
}

LambdaSchedule lambda_schedule(double c_S, double c_T, Eigen::Index N, Eigen::Index p,
                               const std::vector<Eigen::Index>& T, Eigen::Index T0) {
    if (c_S <= 0.0 || c_T <= 0.0)
        throw std::invalid_argument("lambda_schedule: constants must be positive");
    if (N < 1 || p < 1 || T0 < 1 || T.empty())
        throw std::invalid_argument("lambda_schedule: dimensions must be positive");
    const double n = static_cast<double>(N), pp = static_cast<double>(p);
    const double K = static_cast<double>(T.size());
    LambdaSchedule s;
    s.c_S = c_S;
    s.c_T = c_T;
    for (Eigen::Index t : T) {
        if (t < 1) throw std::invalid_argument("lambda_schedule: sample sizes must be positive");
        s.lambda.push_back(
            c_S * std::sqrt((n * n * pp + n * std::log(n * K)) / static_cast<double>(t)));
    }
    s.lambda0 = c_T * std::sqrt((n * n * pp + n * std::log(n)) / static_cast<double>(T0));
    return s;
}

double select_c_by_validation(const std::vector<Panel>& sources,
                              const std::vector<double>& c_grid, Eigen::Index holdout_len,
                              const ValidationProtocol& protocol) {
    if (c_grid.empty()) throw config_error("validation: empty penalty-constant grid");
    if (sources.empty()) throw std::invalid_argument("validation: no source panels");
    const Eigen::Index p = protocol.p;
    if (holdout_len < 1) throw config_error("validation: holdout length must be >= 1");
    for (const auto& s : sources)
        if (s.Y.cols() - holdout_len < p + 1)
            throw config_error("validation: holdout leaves too few observations for panel '" +
                               s.id + "'");

    const Eigen::Index N = sources.front().Y.rows();

    std::vector<Panel> train;
    std::vector<Eigen::Index> T_train;
    train.reserve(sources.size());
    for (const auto& s : sources) {
        train.push_back({s.id, s.Y.leftCols(s.Y.cols() - holdout_len)});
        T_train.push_back(train.back().Y.cols() - p);
    }

    // The initializer does not depend on the penalty level, so it is shared
    // across the whole grid.
    const InitBundle bundle = initialize_all(train, p, {}, protocol.init);
    const StageOneState init = initial_state(bundle);
    std::vector<TaskData> tasks = make_task_data(train, p);

    std::vector<double> grid = c_grid;
    std::sort(grid.begin(), grid.end());

    double best_c = grid.front();
    double best_err = std::numeric_limits<double>::infinity();
    for (double c : grid) {
        const LambdaSchedule sched = lambda_schedule(c, c, N, p, T_train, T_train.front());
        PenaltyConfig cfg = protocol.cfg;
        cfg.lambda = sched.lambda;
        cfg.weights.clear();
        cfg.eta.clear();
        const Stage1Result fit = stage1_fit(tasks, bundle.s_ranks, cfg, init);

        double sq_sum = 0.0;
        Eigen::Index count = 0;
        for (std::size_t k = 0; k < sources.size(); ++k) {
            const Tensor3 A =
                tucker_product(fit.state.D[k], fit.U, fit.V, fit.L) + fit.state.R[k];
            const Eigen::MatrixXd A1 = matricize(A, 1);
            const Eigen::MatrixXd& Y = sources[k].Y;
            const Eigen::Index total = Y.cols();
            for (Eigen::Index t = total - holdout_len; t < total; ++t) {
                Eigen::VectorXd x(N * p);
                for (Eigen::Index j = 1; j <= p; ++j) x.segment((j - 1) * N, N) = Y.col(t - j);
                sq_sum += (Y.col(t) - A1 * x).squaredNorm();
                ++count;
            }
        }
        const double err = std::sqrt(sq_sum / static_cast<double>(count));
        if (err < best_err) {
            best_err = err;
            best_c = c;
        }
    }
    return best_c;
}

}  // namespace tlvar
