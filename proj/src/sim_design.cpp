// SPDX-License-Identifier: MIT
#include "tlvar/sim_design.hpp"

#include <stdexcept>
#include <string>

#include "tlvar/errors.hpp"
#include "tlvar/linalg.hpp"
#include "tlvar/rng.hpp"

namespace tlvar {

namespace {

constexpr std::uint64_t kPoolStream = 0;
constexpr int kMaxAttempts = 1000;

// Two distinct column indices of a pool with s columns, in draw order.
std::pair<Eigen::Index, Eigen::Index> pick_two(Rng& rng, Eigen::Index s) {
    const auto i = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(s)));
    auto j = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(s - 1)));
    if (j >= i) ++j;
    return {i, j};
}

Eigen::MatrixXd two_columns(const Eigen::MatrixXd& pool, Rng& rng) {
    const auto [i, j] = pick_two(rng, pool.cols());
    Eigen::MatrixXd out(pool.rows(), 2);
    out.col(0) = pool.col(i);
    out.col(1) = pool.col(j);
    return out;
}

// Remove the span of B (orthonormal columns) from each column of the mode-m
// matricization of t.
Tensor3 project_out(const Tensor3& t, const Eigen::MatrixXd& B, int mode) {
    Eigen::MatrixXd M = matricize(t, mode);
    M -= B * (B.transpose() * M);
    return fold(M, mode, t.d1(), t.d2(), t.d3());
}

TaskTruth draw_task(const SimDesign& d, const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
                    const Eigen::MatrixXd& L, Rng& rng) {
    const bool lagged = d.p > 1;
    const Eigen::Index c3 = lagged ? 2 : 1;

    TaskTruth task;
    task.low_rank.U = two_columns(U, rng);
    task.low_rank.V = two_columns(V, rng);
    task.low_rank.L = lagged ? two_columns(L, rng) : L;
    task.low_rank.orthonormal = true;

    // Super-diagonal core with entries on [0.5, 0.8], unit Frobenius norm,
    // then a random rotation on every non-degenerate mode.
    Tensor3 core(2, 2, c3);
    for (Eigen::Index i = 0; i < 2; ++i) core(i, i, lagged ? i : 0) = rng.uniform(0.5, 0.8);
    core *= 1.0 / core.frobenius_norm();
    core = mode_product(core, orthonormalize(rng.gaussian(2, 2)), 1);
    core = mode_product(core, orthonormalize(rng.gaussian(2, 2)), 2);
    if (lagged) core = mode_product(core, orthonormalize(rng.gaussian(2, 2)), 3);
    task.low_rank.core = core;

    task.R = Tensor3(d.N, d.N, d.p);
    if (d.h > 0.0) {
        Tensor3 G = fold(rng.gaussian(d.N, static_cast<Eigen::Index>(d.N) * d.p), 1, d.N, d.N,
                         d.p);
        // Orthogonality to the shared pools, mode by mode; a pool spanning the
        // whole mode space leaves only the zero tensor, so it is skipped.
        if (U.rows() > U.cols()) G = project_out(G, U, 1);
        if (V.rows() > V.cols()) G = project_out(G, V, 2);
        if (L.rows() > L.cols()) G = project_out(G, L, 3);
        const double norm = G.frobenius_norm();
        if (norm <= 1e-12)
            throw numerical_error("generate_design: degenerate deviation draw");
        task.R = (d.h / norm) * G;
    }
    task.A = tucker_reconstruct(task.low_rank) + task.R;
    return task;
}

}  // namespace

DesignDraw generate_design(const SimDesign& d) {
    if (d.K < 1 || d.N < 1 || d.p < 1 || d.T0 < 1 || d.T_src < 1)
        throw std::invalid_argument("generate_design: K, N, p and sample sizes must be positive");
    if (d.h < 0.0) throw std::invalid_argument("generate_design: h must be >= 0");
    if (d.s1 < 2 || d.s1 > d.N || d.s2 < 2 || d.s2 > d.N)
        throw std::invalid_argument("generate_design: s1, s2 must lie in [2, N]");
    if (d.p == 1) {
        if (d.s3 != 1)
            throw std::invalid_argument("generate_design: s3 must be 1 when p = 1");
    } else if (d.s3 < 2 || d.s3 > d.p) {
        throw std::invalid_argument("generate_design: s3 must lie in [2, p]");
    }

    DesignDraw out;
    Rng pool_rng(derive_seed(d.seed, kPoolStream));
    out.U = orthonormalize(pool_rng.gaussian(d.N, d.s1));
    out.V = orthonormalize(pool_rng.gaussian(d.N, d.s2));
    out.L = d.p > 1 ? orthonormalize(pool_rng.gaussian(d.p, d.s3))
                    : Eigen::MatrixXd::Ones(1, 1);

    out.tasks.reserve(d.K + 1);
    out.procs.reserve(d.K + 1);
    for (int k = 0; k <= d.K; ++k) {
        bool accepted = false;
        for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
            Rng rng(derive_seed(d.seed, 1 + static_cast<std::uint64_t>(k),
                                static_cast<std::uint64_t>(attempt)));
            TaskTruth task = draw_task(d, out.U, out.V, out.L, rng);
            if (!is_stationary(task.A)) {
                ++out.rejections;
                continue;
            }
            VarProcess proc;
            proc.N = d.N;
            proc.p = d.p;
            proc.A = task.A;
            proc.noise_cov = Eigen::MatrixXd::Identity(d.N, d.N);
            out.tasks.push_back(std::move(task));
            out.procs.push_back(std::move(proc));
            accepted = true;
            break;
        }
        if (!accepted)
            throw numerical_error("generate_design: no stationary draw for task " +
                                  std::to_string(k) + " in 1000 attempts");
    }
    return out;
}

}  // namespace tlvar
