// SPDX-License-Identifier: MIT
#include "tlvar/estimator.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "tlvar/errors.hpp"
#include "tlvar/linalg.hpp"

namespace tlvar {

namespace {

// Sufficient statistics of one task. Every loss/gradient evaluation in the
// fitting loops goes through these, so iteration cost does not grow with T.
struct TaskGram {
    Eigen::MatrixXd Sxx;  // X X', Np x Np
    Eigen::MatrixXd Syx;  // Y X', N x Np
    double tryy = 0.0;    // ||Y||_F^2
    Eigen::Index T = 0;
};

TaskGram make_gram(const TaskData& t) {
    if (t.Y.cols() != t.X.cols() || t.Y.cols() < 1)
        throw std::invalid_argument("task data: Y and X must share a positive column count");
    if (t.X.rows() % t.Y.rows() != 0)
        throw std::invalid_argument("task data: X rows must be a multiple of Y rows");
    TaskGram g;
    g.Sxx = t.X * t.X.transpose();
    g.Syx = t.Y * t.X.transpose();
    g.tryy = t.Y.squaredNorm();
    g.T = t.Y.cols();
    return g;
}

double gram_loss(const Eigen::MatrixXd& B1, const TaskGram& g) {
    const double q = g.tryy - 2.0 * (B1.cwiseProduct(g.Syx)).sum() +
                     (B1 * g.Sxx).cwiseProduct(B1).sum();
    return std::max(0.0, q) / (2.0 * static_cast<double>(g.T));
}

Eigen::MatrixXd gram_grad1(const Eigen::MatrixXd& B1, const TaskGram& g) {
    return (B1 * g.Sxx - g.Syx) / static_cast<double>(g.T);
}

// Mode-1 matricization of [[D; U, V, L]].
Eigen::MatrixXd low_rank_mode1(const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
                               const Eigen::MatrixXd& L, const Tensor3& D) {
    return U * matricize(D, 1) * kron(L, V).transpose();
}

struct ResolvedCfg {
    std::vector<double> lambda, w, eta;
};

ResolvedCfg resolve_cfg(const std::vector<TaskGram>& grams, const PenaltyConfig& cfg) {
    const std::size_t K = grams.size();
    ResolvedCfg r;

    if (cfg.lambda.empty())
        throw std::invalid_argument("PenaltyConfig: lambda must have 1 or K entries");
    if (cfg.lambda.size() == 1)
        r.lambda.assign(K, cfg.lambda[0]);
    else if (cfg.lambda.size() == K)
        r.lambda = cfg.lambda;
    else
        throw std::invalid_argument("PenaltyConfig: lambda size mismatch");
    for (double l : r.lambda)
        if (l < 0.0) throw std::invalid_argument("PenaltyConfig: lambda must be >= 0");

    if (cfg.weights.empty()) {
        double total = 0.0;
        for (const auto& g : grams) total += static_cast<double>(g.T);
        for (const auto& g : grams) r.w.push_back(static_cast<double>(g.T) / total);
    } else if (cfg.weights.size() == K) {
        double sum = 0.0;
        for (double w : cfg.weights) {
            if (w < 0.0) throw std::invalid_argument("PenaltyConfig: weights must be >= 0");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw std::invalid_argument("PenaltyConfig: weights must sum to 1");
        r.w = cfg.weights;
        for (double& w : r.w) w /= sum;
    } else {
        throw std::invalid_argument("PenaltyConfig: weights size mismatch");
    }

    if (cfg.eta.empty()) {
        for (const auto& g : grams)
            r.eta.push_back(static_cast<double>(g.T) / lambda_max_sym(g.Sxx, 1e-10));
    } else if (cfg.eta.size() == 1) {
        r.eta.assign(K, cfg.eta[0]);
    } else if (cfg.eta.size() == K) {
        r.eta = cfg.eta;
    } else {
        throw std::invalid_argument("PenaltyConfig: eta size mismatch");
    }
    for (double e : r.eta)
        if (e <= 0.0) throw std::invalid_argument("PenaltyConfig: eta must be > 0");
    return r;
}

double ortho_penalty(const Eigen::MatrixXd& F, double b) {
    const Eigen::MatrixXd G =
        F.transpose() * F - b * b * Eigen::MatrixXd::Identity(F.cols(), F.cols());
    return G.squaredNorm();
}

// Variables of the joint descent in Step 2.
struct Step2Vars {
    Eigen::MatrixXd U, V, L;
    std::vector<Tensor3> D;
};

Step2Vars axpy(const Step2Vars& x, double s, const Step2Vars& g) {
    Step2Vars out;
    out.U = x.U - s * g.U;
    out.V = x.V - s * g.V;
    out.L = x.L - s * g.L;
    out.D.reserve(x.D.size());
    for (std::size_t k = 0; k < x.D.size(); ++k) out.D.push_back(x.D[k] - s * g.D[k]);
    return out;
}

double dot_self(const Step2Vars& g) {
    double s = g.U.squaredNorm() + g.V.squaredNorm() + g.L.squaredNorm();
    for (const auto& d : g.D) s += d.data().squaredNorm();
    return s;
}

// Step-2 objective/gradient evaluator with the deviations held fixed.
struct Step2Problem {
    const std::vector<TaskGram>* grams;
    const std::vector<Eigen::MatrixXd>* R1;  // mode-1 views of the fixed R_k
    const std::vector<double>* w;
    double a, b;

    [[nodiscard]] double value(const Step2Vars& v) const {
        const Eigen::MatrixXd KLV = kron(v.L, v.V);
        double f = 0.0;
        for (std::size_t k = 0; k < grams->size(); ++k) {
            const Eigen::MatrixXd B1 = v.U * matricize(v.D[k], 1) * KLV.transpose() + (*R1)[k];
            f += (*w)[k] * gram_loss(B1, (*grams)[k]);
        }
        f += (a / 4.0) * (ortho_penalty(v.U, b) + ortho_penalty(v.V, b) + ortho_penalty(v.L, b));
        return f;
    }

    [[nodiscard]] Step2Vars gradient(const Step2Vars& v) const {
        const Eigen::Index s1 = v.U.cols(), s2 = v.V.cols(), s3 = v.L.cols();
        const Eigen::Index N = v.U.rows(), p = v.L.rows();
        const Eigen::MatrixXd KLV = kron(v.L, v.V);
        const Eigen::MatrixXd KLU = kron(v.L, v.U);
        const Eigen::MatrixXd KVU = kron(v.V, v.U);
        Step2Vars g;
        g.U = Eigen::MatrixXd::Zero(N, s1);
        g.V = Eigen::MatrixXd::Zero(N, s2);
        g.L = Eigen::MatrixXd::Zero(p, s3);
        g.D.assign(v.D.size(), Tensor3(s1, s2, s3));
        for (std::size_t k = 0; k < grams->size(); ++k) {
            const Eigen::MatrixXd D1 = matricize(v.D[k], 1);
            const Eigen::MatrixXd B1 = v.U * D1 * KLV.transpose() + (*R1)[k];
            const Eigen::MatrixXd G1 = (*w)[k] * gram_grad1(B1, (*grams)[k]);
            const Tensor3 G = fold(G1, 1, N, v.V.rows(), p);
            g.U += G1 * KLV * D1.transpose();
            g.V += matricize(G, 2) * KLU * matricize(v.D[k], 2).transpose();
            g.L += matricize(G, 3) * KVU * matricize(v.D[k], 3).transpose();
            g.D[k] = fold(v.U.transpose() * G1 * KLV, 1, s1, s2, s3);
        }
        const auto bb = b * b;
        g.U += a * v.U *
               (v.U.transpose() * v.U - bb * Eigen::MatrixXd::Identity(s1, s1));
        g.V += a * v.V *
               (v.V.transpose() * v.V - bb * Eigen::MatrixXd::Identity(s2, s2));
        g.L += a * v.L *
               (v.L.transpose() * v.L - bb * Eigen::MatrixXd::Identity(s3, s3));
        return g;
    }
};

// Armijo backtracking descent, at most max_inner accepted steps. Returns the
// (typically) improved variables; stops early once relative progress stalls.
Step2Vars descend(const Step2Problem& prob, Step2Vars vars, int max_inner, double inner_tol) {
    double step = 1.0;
    for (int it = 0; it < max_inner; ++it) {
        const double f0 = prob.value(vars);
        const Step2Vars grad = prob.gradient(vars);
        const double g2 = dot_self(grad);
        if (g2 <= 1e-24) break;
        bool accepted = false;
        double f_new = f0;
        while (step > 1e-20) {
            Step2Vars trial = axpy(vars, step, grad);
            f_new = prob.value(trial);
            if (f_new <= f0 - 1e-4 * step * g2) {
                vars = std::move(trial);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        if (f0 - f_new <= inner_tol * std::max(1.0, std::abs(f0))) break;
        step = std::min(step * 2.0, 1e6);
    }
    return vars;
}

std::string format_trace_tail(const std::vector<double>& trace) {
    std::ostringstream os;
    os << "objective trace tail:";
    const std::size_t from = trace.size() > 6 ? trace.size() - 6 : 0;
    for (std::size_t i = from; i < trace.size(); ++i) os << " " << trace[i];
    return os.str();
}

Tensor3 closed_form_core(const TaskGram& g, const Eigen::MatrixXd& R1, const Eigen::MatrixXd& U,
                         const Eigen::MatrixXd& V, const Eigen::MatrixXd& L) {
    const Eigen::MatrixXd KLV = kron(L, V);
    const Eigen::MatrixXd M = KLV.transpose() * g.Sxx * KLV;
    const Eigen::MatrixXd B = U.transpose() * (g.Syx - R1 * g.Sxx) * KLV;
    const Eigen::MatrixXd D1 = solve_sym_guarded(M, B.transpose(), 1e12,
                                                 "target core normal equations")
                                   .transpose();
    return fold(D1, 1, U.cols(), V.cols(), L.cols());
}

}  // namespace

std::vector<TaskData> make_task_data(const std::vector<Panel>& panels, Eigen::Index p) {
    std::vector<TaskData> out;
    out.reserve(panels.size());
    for (const auto& panel : panels) {
        LagDesign d = lag_design(panel, p);
        out.push_back({std::move(d.Y), std::move(d.X)});
    }
    return out;
}

double ols_loss(const Tensor3& A, const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X) {
    if (Y.cols() != X.cols() || Y.cols() < 1)
        throw std::invalid_argument("ols_loss: Y and X must share a positive column count");
    const Eigen::MatrixXd A1 = matricize(A, 1);
    if (A1.rows() != Y.rows() || A1.cols() != X.rows())
        throw std::invalid_argument("ols_loss: tensor shape inconsistent with data");
    return (Y - A1 * X).squaredNorm() / (2.0 * static_cast<double>(Y.cols()));
}

Tensor3 ols_loss_gradient(const Tensor3& A, const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X) {
    if (Y.cols() != X.cols() || Y.cols() < 1)
        throw std::invalid_argument("ols_loss_gradient: Y and X must share a column count");
    const Eigen::MatrixXd A1 = matricize(A, 1);
    if (A1.rows() != Y.rows() || A1.cols() != X.rows())
        throw std::invalid_argument("ols_loss_gradient: tensor shape inconsistent with data");
    const Eigen::MatrixXd G1 = -(Y - A1 * X) * X.transpose() / static_cast<double>(Y.cols());
    return fold(G1, 1, A.d1(), A.d2(), A.d3());
}

Tensor3 prox_frobenius(const Tensor3& A, double c) {
    if (c < 0.0) throw std::invalid_argument("prox_frobenius: c must be >= 0");
    if (c == 0.0) return A;
    const double norm = A.frobenius_norm();
    if (norm <= c) return Tensor3(A.d1(), A.d2(), A.d3());
    return (1.0 - c / norm) * A;
}

double step_size(const Eigen::MatrixXd& X, Eigen::Index T) {
    if (X.size() == 0 || X.isZero(0.0))
        throw std::invalid_argument("step_size: X must be nonzero");
    if (T < 1) throw std::invalid_argument("step_size: T must be >= 1");
    return static_cast<double>(T) / lambda_max_sym(X * X.transpose(), 1e-8);
}

Tensor3 prox_update_R(const Tensor3& R, const Tensor3& low_rank_part, const Eigen::MatrixXd& Y,
                      const Eigen::MatrixXd& X, double eta, double lambda) {
    if (!R.same_dims(low_rank_part))
        throw std::invalid_argument("prox_update_R: tensor dims mismatch");
    if (eta < 0.0 || lambda < 0.0)
        throw std::invalid_argument("prox_update_R: eta and lambda must be >= 0");
    const Tensor3 grad = ols_loss_gradient(low_rank_part + R, Y, X);
    return prox_frobenius(R - eta * grad, eta * lambda);
}

double rl_objective(const StageOneState& state, const std::vector<TaskData>& tasks,
                    const PenaltyConfig& cfg) {
    if (tasks.empty()) throw std::invalid_argument("rl_objective: no tasks");
    if (state.D.size() != tasks.size() || state.R.size() != tasks.size())
        throw std::invalid_argument("rl_objective: state block count mismatch");
    std::vector<TaskGram> grams;
    grams.reserve(tasks.size());
    for (const auto& t : tasks) grams.push_back(make_gram(t));
    const ResolvedCfg rc = resolve_cfg(grams, cfg);

    std::vector<Eigen::MatrixXd> R1;
    R1.reserve(tasks.size());
    for (const auto& r : state.R) R1.push_back(matricize(r, 1));
    Step2Problem prob{&grams, &R1, &rc.w, cfg.a, cfg.b};
    return prob.value({state.U, state.V, state.L, state.D});
}

RlGradients rl_gradients(const StageOneState& state, const std::vector<TaskData>& tasks,
                         const PenaltyConfig& cfg) {
    if (tasks.empty()) throw std::invalid_argument("rl_gradients: no tasks");
    if (state.D.size() != tasks.size() || state.R.size() != tasks.size())
        throw std::invalid_argument("rl_gradients: state block count mismatch");
    std::vector<TaskGram> grams;
    grams.reserve(tasks.size());
    for (const auto& t : tasks) grams.push_back(make_gram(t));
    const ResolvedCfg rc = resolve_cfg(grams, cfg);

    std::vector<Eigen::MatrixXd> R1;
    R1.reserve(tasks.size());
    for (const auto& r : state.R) R1.push_back(matricize(r, 1));
    Step2Problem prob{&grams, &R1, &rc.w, cfg.a, cfg.b};
    Step2Vars g = prob.gradient({state.U, state.V, state.L, state.D});
    return {std::move(g.U), std::move(g.V), std::move(g.L), std::move(g.D)};
}

Stage1Result stage1_fit(const std::vector<TaskData>& tasks, std::array<Eigen::Index, 3> ranks,
                        const PenaltyConfig& cfg, const StageOneState& init, bool freeze_R) {
    const std::size_t K = tasks.size();
    if (K == 0) throw std::invalid_argument("stage1_fit: no tasks");
    if (init.D.size() != K || init.R.size() != K)
        throw std::invalid_argument("stage1_fit: init block count mismatch");
    if (init.U.cols() != ranks[0] || init.V.cols() != ranks[1] || init.L.cols() != ranks[2])
        throw std::invalid_argument("stage1_fit: init factor widths disagree with ranks");
    const Eigen::Index N = init.U.rows(), p = init.L.rows();
    for (const auto& t : tasks)
        if (t.Y.rows() != N || t.X.rows() != N * p)
            throw std::invalid_argument("stage1_fit: task shapes disagree with init");

    std::vector<TaskGram> grams;
    grams.reserve(K);
    for (const auto& t : tasks) grams.push_back(make_gram(t));
    const ResolvedCfg rc = resolve_cfg(grams, cfg);

    StageOneState st = init;
    std::vector<Eigen::MatrixXd> R1;
    R1.reserve(K);
    for (const auto& r : st.R) R1.push_back(matricize(r, 1));

    const auto penalized_objective = [&]() {
        const Eigen::MatrixXd KLV = kron(st.L, st.V);
        double J = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const Eigen::MatrixXd B1 =
                st.U * matricize(st.D[k], 1) * KLV.transpose() + R1[k];
            J += rc.w[k] * (gram_loss(B1, grams[k]) + rc.lambda[k] * st.R[k].frobenius_norm());
        }
        return J;
    };

    std::vector<double> trace{penalized_objective()};
    const double inner_tol = 0.01 * cfg.tol;

    for (int outer = 0; outer < cfg.max_outer; ++outer) {
        // Step 1: independent proximal updates of the deviations.
        if (!freeze_R) {
            const Eigen::MatrixXd KLV = kron(st.L, st.V);
            for (std::size_t k = 0; k < K; ++k) {
                const Eigen::MatrixXd low1 = st.U * matricize(st.D[k], 1) * KLV.transpose();
                const Eigen::MatrixXd G1 = gram_grad1(low1 + R1[k], grams[k]);
                const Tensor3 shifted =
                    st.R[k] - rc.eta[k] * fold(G1, 1, N, N, p);
                st.R[k] = prox_frobenius(shifted, rc.eta[k] * rc.lambda[k]);
                R1[k] = matricize(st.R[k], 1);
            }
        }

        // Step 2: joint descent over the factors and cores.
        Step2Problem prob{&grams, &R1, &rc.w, cfg.a, cfg.b};
        Step2Vars vars = descend(prob, {st.U, st.V, st.L, st.D}, cfg.max_inner, inner_tol);
        st.U = std::move(vars.U);
        st.V = std::move(vars.V);
        st.L = std::move(vars.L);
        st.D = std::move(vars.D);

        // Re-express with orthonormal factors, cores counter-rotated so every
        // [[D_k; U, V, L]] is preserved; this zeroes the orthogonality
        // penalty without touching the data losses.
        const PolarResult pu = polar_factor(st.U), pv = polar_factor(st.V),
                          pl = polar_factor(st.L);
        st.U = pu.Q;
        st.V = pv.Q;
        st.L = pl.Q;
        for (auto& d : st.D)
            d = mode_product(mode_product(mode_product(d, pu.H, 1), pv.H, 2), pl.H, 3);

        st.iterations = outer + 1;
        const double J_prev = trace.back();
        const double J = penalized_objective();
        trace.push_back(J);
        if (J > J_prev + 1e-8 * std::max(1.0, std::abs(J_prev)))
            throw numerical_error("stage1_fit: objective increased at outer iteration " +
                                  std::to_string(outer + 1) + "; " + format_trace_tail(trace));
        if (std::abs(J_prev - J) <= cfg.tol * std::max(1.0, std::abs(J_prev))) break;
    }

    Stage1Result out;
    out.U = st.U;
    out.V = st.V;
    out.L = st.L;
    out.state = std::move(st);
    out.objective_trace = std::move(trace);
    return out;
}

Tensor3 closed_form_D0(const Eigen::MatrixXd& Y0, const Eigen::MatrixXd& X0, const Tensor3& R0,
                       const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
                       const Eigen::MatrixXd& L) {
    const Eigen::Index N = U.rows(), p = L.rows();
    if (Y0.rows() != N || X0.rows() != N * p || Y0.cols() != X0.cols())
        throw std::invalid_argument("closed_form_D0: data shapes inconsistent with factors");
    if (R0.d1() != N || R0.d2() != N || R0.d3() != p)
        throw std::invalid_argument("closed_form_D0: deviation shape mismatch");
    TaskGram g = make_gram({Y0, X0});
    return closed_form_core(g, matricize(R0, 1), U, V, L);
}

TransferFit stage2_fit(const Panel& target, const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
                       const Eigen::MatrixXd& L, double lambda0, const PenaltyConfig& cfg,
                       bool freeze_R) {
    const Eigen::Index p = L.rows();
    if (lambda0 < 0.0) throw std::invalid_argument("stage2_fit: lambda0 must be >= 0");
    LagDesign lag = lag_design(target, p);
    const Eigen::Index N = lag.Y.rows();
    if (U.rows() != N || V.rows() != N)
        throw std::invalid_argument("stage2_fit: factor rows disagree with the panel");
    const TaskGram g = make_gram({lag.Y, lag.X});
    const double eta =
        cfg.eta.empty() ? static_cast<double>(g.T) / lambda_max_sym(g.Sxx, 1e-10) : cfg.eta[0];
    if (eta <= 0.0) throw std::invalid_argument("stage2_fit: eta must be > 0");

    Tensor3 R0(N, N, p);
    Eigen::MatrixXd R1 = Eigen::MatrixXd::Zero(N, N * p);
    Tensor3 D0 = closed_form_core(g, R1, U, V, L);

    const auto objective = [&]() {
        const Eigen::MatrixXd B1 = low_rank_mode1(U, V, L, D0) + R1;
        return gram_loss(B1, g) + lambda0 * R0.frobenius_norm();
    };

    std::vector<double> trace{objective()};
    int iterations = 0;
    for (int outer = 0; outer < cfg.max_outer && !freeze_R; ++outer) {
        const Eigen::MatrixXd low1 = low_rank_mode1(U, V, L, D0);
        const Eigen::MatrixXd G1 = gram_grad1(low1 + R1, g);
        R0 = prox_frobenius(R0 - eta * fold(G1, 1, N, N, p), eta * lambda0);
        R1 = matricize(R0, 1);
        D0 = closed_form_core(g, R1, U, V, L);

        iterations = outer + 1;
        const double J_prev = trace.back();
        const double J = objective();
        trace.push_back(J);
        if (J > J_prev + 1e-8 * std::max(1.0, std::abs(J_prev)))
            throw numerical_error("stage2_fit: objective increased at iteration " +
                                  std::to_string(outer + 1) + "; " + format_trace_tail(trace));
        if (std::abs(J_prev - J) <= cfg.tol * std::max(1.0, std::abs(J_prev))) break;
    }

    TransferFit fit;
    fit.U = U;
    fit.V = V;
    fit.L = L;
    fit.D0 = D0;
    fit.R0 = R0;
    fit.A0 = tucker_product(D0, U, V, L) + R0;
    fit.objective_trace = std::move(trace);
    fit.iterations = iterations;
    return fit;
}

}  // namespace tlvar
