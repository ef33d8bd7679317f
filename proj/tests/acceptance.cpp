// SPDX-License-Identifier: MIT
//
// Acceptance gate. Runs nine checks covering the tensor core, the gradients,
// the closed-form oracles, objective monotonicity, the three simulation
// trends, the observed-data harness, and byte-level determinism. Prints one
// line per criterion (PASS / FAIL / SKIP) and exits nonzero if any criterion
// fails. All tolerances are fixed in this file.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tlvar/baselines.hpp"
#include "tlvar/errors.hpp"
#include "tlvar/estimator.hpp"
#include "tlvar/experiments.hpp"
#include "tlvar/forecast.hpp"
#include "tlvar/linalg.hpp"
#include "tlvar/rng.hpp"
#include "tlvar/selection.hpp"
#include "tlvar/sim_design.hpp"
#include "tlvar/tensor.hpp"
#include "tlvar/var.hpp"

using namespace tlvar;

namespace {

struct Checker {
    std::vector<std::string> failures;
    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

std::string join_failures(const std::vector<std::string>& failures, std::size_t max_shown = 3) {
    std::string out;
    for (std::size_t i = 0; i < failures.size() && i < max_shown; ++i) {
        if (!out.empty()) out += "; ";
        out += failures[i];
    }
    if (failures.size() > max_shown)
        out += "; +" + std::to_string(failures.size() - max_shown) + " more";
    return out;
}

Tensor3 random_tensor(Rng& rng, Eigen::Index d1, Eigen::Index d2, Eigen::Index d3) {
    Tensor3 t(d1, d2, d3);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()(i) = rng.normal();
    return t;
}

// The companion radius is not linear in the coefficient scale when p > 1, so
// shrink geometrically until the radius first drops below the target.
Tensor3 shrunk_random(Rng& rng, Eigen::Index N, Eigen::Index p, double rho) {
    Tensor3 A = random_tensor(rng, N, N, p);
    while (spectral_radius(companion_matrix(A)) > rho) A *= 0.9;
    return A;
}

Panel noisy_panel(const Tensor3& A, Eigen::Index T, std::uint64_t seed) {
    VarProcess proc;
    proc.N = A.d1();
    proc.p = A.d3();
    proc.A = A;
    proc.noise_cov = Eigen::MatrixXd::Identity(A.d1(), A.d1());
    return simulate(proc, T, 200, seed);
}

StageOneState random_state(Rng& rng, Eigen::Index N, Eigen::Index p,
                           std::array<Eigen::Index, 3> ranks, std::size_t K) {
    StageOneState st;
    st.U = rng.gaussian(N, ranks[0]);
    st.V = rng.gaussian(N, ranks[1]);
    st.L = rng.gaussian(p, ranks[2]);
    for (std::size_t k = 0; k < K; ++k) {
        st.D.push_back(random_tensor(rng, ranks[0], ranks[1], ranks[2]));
        st.R.push_back(random_tensor(rng, N, N, p));
    }
    return st;
}

// Reference coordinate descent for (1/2T)||Y - B X||_F^2 + lambda ||B||_1.
Eigen::MatrixXd lasso_cd(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X, double lambda) {
    const Eigen::Index T = Y.cols();
    const Eigen::MatrixXd Sxx = X * X.transpose();
    const Eigen::MatrixXd Syx = Y * X.transpose();
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(Y.rows(), X.rows());
    const double thresh = lambda * static_cast<double>(T);
    for (int sweep = 0; sweep < 20000; ++sweep) {
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
        if (max_change < 1e-13) break;
    }
    return B;
}

// Mean metric value per group key for one method; NaN poisons the group mean,
// so a failed replication fails the comparison it feeds.
std::map<double, double> mean_by(const std::vector<MetricsRow>& rows, const std::string& method,
                                 const std::function<double(const MetricsRow&)>& key) {
    std::map<double, double> sums;
    std::map<double, long long> counts;
    for (const auto& r : rows) {
        if (r.method != method) continue;
        sums[key(r)] += r.value;
        counts[key(r)] += 1;
    }
    std::map<double, double> means;
    for (const auto& [k, s] : sums) means[k] = s / static_cast<double>(counts[k]);
    return means;
}

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    auto ranks = [&](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i + 1);
        return r;
    };
    const std::vector<double> rx = ranks(x), ry = ranks(y);
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    const double nn = static_cast<double>(n);
    return 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0));
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Pulls `metric` values per method out of a results.csv body.
std::map<std::string, double> csv_metric(const std::string& csv, const std::string& metric) {
    std::map<std::string, double> out;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::string f;
        std::istringstream ls(line);
        while (std::getline(ls, f, ',')) fields.push_back(f);
        if (fields.size() < 15) continue;
        if (fields[13] == metric) out[fields[10]] = std::stod(fields[14]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

void criterion_tensor_core(Checker& c) {
    Rng rng(9001);
    for (int inst = 0; inst < 220; ++inst) {
        const Eigen::Index d1 = 1 + static_cast<Eigen::Index>(rng.uniform_int(6));
        const Eigen::Index d2 = 1 + static_cast<Eigen::Index>(rng.uniform_int(6));
        const Eigen::Index d3 = 1 + static_cast<Eigen::Index>(rng.uniform_int(4));
        const Tensor3 t = random_tensor(rng, d1, d2, d3);
        const double norm = t.frobenius_norm();

        for (int mode = 1; mode <= 3; ++mode) {
            const Eigen::MatrixXd m = matricize(t, mode);
            const Tensor3 back = fold(m, mode, d1, d2, d3);
            c.expect((back - t).frobenius_norm() <= 1e-14 * std::max(1.0, norm),
                     "matricize/fold round trip, mode " + std::to_string(mode));
            c.expect(std::abs(m.norm() - norm) <= 1e-12 * std::max(1.0, norm),
                     "norm consistency, mode " + std::to_string(mode));
        }

        // Mode products along different modes commute.
        const Eigen::MatrixXd M1 = rng.gaussian(1 + rng.uniform_int(4), d1);
        const Eigen::MatrixXd M2 = rng.gaussian(1 + rng.uniform_int(4), d2);
        const Eigen::MatrixXd M3 = rng.gaussian(1 + rng.uniform_int(3), d3);
        const Tensor3 ab = mode_product(mode_product(t, M1, 1), M2, 2);
        const Tensor3 ba = mode_product(mode_product(t, M2, 2), M1, 1);
        c.expect((ab - ba).frobenius_norm() <= 1e-12 * std::max(1.0, ab.frobenius_norm()),
                 "mode 1/2 product commutation");
        const Tensor3 ac = mode_product(mode_product(t, M1, 1), M3, 3);
        const Tensor3 ca = mode_product(mode_product(t, M3, 3), M1, 1);
        c.expect((ac - ca).frobenius_norm() <= 1e-12 * std::max(1.0, ac.frobenius_norm()),
                 "mode 1/3 product commutation");

        // HOSVD reconstructs an exact-rank tensor. A mode's rank is capped by
        // the smaller side of its matricization, not by its dimension alone.
        if (inst % 2 == 0) {
            const Eigen::Index r1 =
                1 + static_cast<Eigen::Index>(rng.uniform_int(std::min(d1, d2 * d3)));
            const Eigen::Index r2 =
                1 + static_cast<Eigen::Index>(rng.uniform_int(std::min(d2, d1 * d3)));
            const Eigen::Index r3 =
                1 + static_cast<Eigen::Index>(rng.uniform_int(std::min(d3, d1 * d2)));
            const Tensor3 core = random_tensor(rng, r1, r2, r3);
            const Tensor3 low = tucker_product(core, rng.gaussian(d1, r1), rng.gaussian(d2, r2),
                                               rng.gaussian(d3, r3));
            const TuckerFactors f = hosvd(low, r1, r2, r3);
            const Tensor3 rec = tucker_reconstruct(f);
            c.expect((rec - low).frobenius_norm() <= 1e-8 * std::max(1.0, low.frobenius_norm()),
                     "HOSVD exactness at the true multilinear ranks");
        }
    }
}

void criterion_gradients(Checker& c) {
    Rng rng(9002);

    for (int rep = 0; rep < 10; ++rep) {
        const Eigen::Index N = 2 + static_cast<Eigen::Index>(rng.uniform_int(7));
        const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng.uniform_int(3));
        const Eigen::Index T = 30;
        const Tensor3 A = random_tensor(rng, N, N, p);
        const Eigen::MatrixXd X = rng.gaussian(N * p, T);
        const Eigen::MatrixXd Y = rng.gaussian(N, T);
        const Tensor3 g = ols_loss_gradient(A, Y, X);
        Tensor3 dir = random_tensor(rng, N, N, p);
        dir *= 1.0 / dir.frobenius_norm();
        const double h = 1e-5;
        const double fd = (ols_loss(A + h * dir, Y, X) - ols_loss(A - h * dir, Y, X)) / (2.0 * h);
        const double gd = dot(g, dir);
        c.expect(std::abs(gd - fd) <= 1e-5 * std::max({1.0, std::abs(gd), std::abs(fd)}),
                 "squared-loss gradient vs central differences");
    }

    int instances = 0;
    while (instances < 22) {
        const Eigen::Index N = 2 + static_cast<Eigen::Index>(rng.uniform_int(7));
        const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng.uniform_int(3));
        const std::array<Eigen::Index, 3> ranks = {
            1 + static_cast<Eigen::Index>(rng.uniform_int(std::min<Eigen::Index>(N, 3))),
            1 + static_cast<Eigen::Index>(rng.uniform_int(std::min<Eigen::Index>(N, 3))),
            1 + static_cast<Eigen::Index>(rng.uniform_int(p))};
        const std::size_t K = 1 + rng.uniform_int(3);

        StageOneState st = random_state(rng, N, p, ranks, K);
        std::vector<TaskData> tasks;
        for (std::size_t k = 0; k < K; ++k) {
            TaskData task;
            task.X = rng.gaussian(N * p, 15 + static_cast<Eigen::Index>(rng.uniform_int(20)));
            task.Y = rng.gaussian(N, task.X.cols());
            tasks.push_back(task);
        }
        PenaltyConfig cfg;
        cfg.lambda = {0.5};
        cfg.a = 0.75;
        cfg.b = 1.25;

        const RlGradients g = rl_gradients(st, tasks, cfg);
        const double h = 1e-5;
        auto check_block = [&](auto&& apply, double gdotd, const std::string& name) {
            StageOneState plus = st, minus = st;
            apply(plus, h);
            apply(minus, -h);
            const double fd =
                (rl_objective(plus, tasks, cfg) - rl_objective(minus, tasks, cfg)) / (2.0 * h);
            c.expect(std::abs(gdotd - fd) <= 1e-5 * std::max({1.0, std::abs(fd), std::abs(gdotd)}),
                     name + " gradient vs central differences");
        };

        const Eigen::MatrixXd dU = rng.gaussian(N, ranks[0]);
        check_block([&](StageOneState& s, double t) { s.U += t * dU; },
                    (g.U.array() * dU.array()).sum(), "U");
        const Eigen::MatrixXd dV = rng.gaussian(N, ranks[1]);
        check_block([&](StageOneState& s, double t) { s.V += t * dV; },
                    (g.V.array() * dV.array()).sum(), "V");
        const Eigen::MatrixXd dL = rng.gaussian(p, ranks[2]);
        check_block([&](StageOneState& s, double t) { s.L += t * dL; },
                    (g.L.array() * dL.array()).sum(), "L");
        for (std::size_t k = 0; k < K; ++k) {
            const Tensor3 dD = random_tensor(rng, ranks[0], ranks[1], ranks[2]);
            check_block([&](StageOneState& s, double t) { s.D[k] += t * dD; }, dot(g.D[k], dD),
                        "core");
        }
        ++instances;
    }
}

void criterion_oracles(Checker& c) {
    Rng rng(9003);

    // Closed-form target core equals least squares under identity factors.
    for (int rep = 0; rep < 5; ++rep) {
        const Eigen::Index N = 3 + static_cast<Eigen::Index>(rng.uniform_int(3));
        const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng.uniform_int(2));
        const Eigen::Index T = 30 * N;
        const Eigen::MatrixXd X = rng.gaussian(N * p, T);
        const Eigen::MatrixXd Y = rng.gaussian(N, T);
        Tensor3 R0(N, N, p);
        const Eigen::MatrixXd I_N = Eigen::MatrixXd::Identity(N, N);
        const Eigen::MatrixXd I_p = Eigen::MatrixXd::Identity(p, p);
        const Tensor3 D0 = closed_form_D0(Y, X, R0, I_N, I_N, I_p);
        const Eigen::MatrixXd ols =
            ((X * X.transpose()).ldlt().solve(X * Y.transpose())).transpose();
        c.expect((matricize(D0, 1) - ols).norm() <= 1e-8 * std::max(1.0, ols.norm()),
                 "closed-form core vs normal equations under identity factors");
    }

    // Full-rank multilinear fit equals least squares.
    for (int rep = 0; rep < 3; ++rep) {
        const Eigen::Index N = 4, p = 2;
        const Panel pan = noisy_panel(shrunk_random(rng, N, p, 0.5), 120,
                                      700 + static_cast<std::uint64_t>(rep));
        const Tensor3 full = fit_mlr_var(pan, p, {N, N, p});
        const Tensor3 ols = ols_var(pan, p);
        c.expect((full - ols).frobenius_norm() <= 1e-8 * std::max(1.0, ols.frobenius_norm()),
                 "full-rank multilinear fit vs least squares");
    }

    // Lasso: KKT residuals and a coordinate-descent oracle.
    for (int rep = 0; rep < 3; ++rep) {
        const Eigen::Index N = 4, p = 2;
        const Panel pan = noisy_panel(shrunk_random(rng, N, p, 0.5), 150,
                                      800 + static_cast<std::uint64_t>(rep));
        const LagDesign d = lag_design(pan, p);
        const double lmax =
            (d.Y * d.X.transpose()).cwiseAbs().maxCoeff() / static_cast<double>(d.Y.cols());
        const double lambda = 0.2 * lmax;
        const Eigen::MatrixXd B = matricize(sparse_var_lasso(pan, p, lambda), 1);
        const Eigen::MatrixXd ref = lasso_cd(d.Y, d.X, lambda);
        c.expect((B - ref).cwiseAbs().maxCoeff() <= 1e-5 * std::max(1.0, ref.cwiseAbs().maxCoeff()),
                 "lasso vs coordinate-descent oracle");
        const Eigen::MatrixXd G =
            (B * (d.X * d.X.transpose()) - d.Y * d.X.transpose()) / static_cast<double>(d.Y.cols());
        double worst = 0.0;
        for (Eigen::Index i = 0; i < B.rows(); ++i)
            for (Eigen::Index j = 0; j < B.cols(); ++j) {
                const double r = B(i, j) == 0.0
                                     ? std::max(0.0, std::abs(G(i, j)) - lambda)
                                     : std::abs(G(i, j) + lambda * (B(i, j) > 0 ? 1.0 : -1.0));
                worst = std::max(worst, r);
            }
        c.expect(worst <= 1e-6, "lasso first-order conditions");
    }
}

void criterion_monotone(Checker& c) {
    Rng rng(9004);
    auto max_rise = [](const std::vector<double>& trace) {
        double worst = 0.0;
        for (std::size_t i = 1; i < trace.size(); ++i)
            worst = std::max(worst, trace[i] - trace[i - 1] -
                                        1e-8 * std::max(1.0, std::abs(trace[i - 1])));
        return worst;
    };

    for (int run = 0; run < 50; ++run) {
        const Eigen::Index N = 3 + static_cast<Eigen::Index>(rng.uniform_int(5));
        const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng.uniform_int(2));
        const std::array<Eigen::Index, 3> ranks = {
            1 + static_cast<Eigen::Index>(rng.uniform_int(std::min<Eigen::Index>(N, 3))),
            1 + static_cast<Eigen::Index>(rng.uniform_int(std::min<Eigen::Index>(N, 3))),
            1 + static_cast<Eigen::Index>(rng.uniform_int(p))};
        const std::size_t K = 1 + rng.uniform_int(3);

        std::vector<Panel> panels;
        for (std::size_t k = 0; k < K; ++k)
            panels.push_back(noisy_panel(shrunk_random(rng, N, p, 0.3 + 0.3 * rng.uniform01()),
                                         40 + static_cast<Eigen::Index>(rng.uniform_int(60)),
                                         derive_seed(9100, static_cast<std::uint64_t>(run), k)));
        const std::vector<TaskData> tasks = make_task_data(panels, p);

        PenaltyConfig cfg;
        cfg.lambda = {0.05 + rng.uniform01()};
        cfg.max_outer = 60;
        StageOneState init = random_state(rng, N, p, ranks, K);
        init.U *= 0.5;
        init.V *= 0.5;
        init.L *= 0.5;

        const Stage1Result s1 = stage1_fit(tasks, ranks, cfg, init);
        c.expect(max_rise(s1.objective_trace) <= 0.0,
                 "representation-stage objective rose on run " + std::to_string(run));

        const Panel target = noisy_panel(shrunk_random(rng, N, p, 0.4), 60,
                                         derive_seed(9200, static_cast<std::uint64_t>(run), 0));
        const TransferFit s2 = stage2_fit(target, s1.U, s1.V, s1.L, 0.2 + rng.uniform01(), cfg);
        c.expect(max_rise(s2.objective_trace) <= 0.0,
                 "target-stage objective rose on run " + std::to_string(run));
    }
}

void criterion_sim1(Checker& c, std::string& note) {
    SimSpec spec = default_sim_spec("sim1");
    spec.settings = {{5, 10, 3, 3}};
    spec.p_list = {1};
    spec.replications = 50;
    spec.methods = {"TL", "Pool", "MLR", "VAR"};
    spec.seed = 20260816;
    spec.threads = 0;
    const auto rows = run_sim1(spec);

    const auto key_h = [](const MetricsRow& r) { return r.h; };
    const auto tl = mean_by(rows, "TL", key_h);
    const auto pool = mean_by(rows, "Pool", key_h);
    const auto mlr = mean_by(rows, "MLR", key_h);
    const auto var = mean_by(rows, "VAR", key_h);

    c.expect(tl.at(0.0) < mlr.at(0.0), "shared-structure fit beats multilinear fit at h=0");
    c.expect(mlr.at(0.0) < var.at(0.0), "multilinear fit beats unrestricted fit at h=0");
    c.expect(tl.at(2.0) <= pool.at(2.0), "adaptive transfer no worse than pooling at h=2");

    std::vector<double> hs, tl_means;
    for (const auto& [h, m] : tl) {
        hs.push_back(h);
        tl_means.push_back(m);
    }
    const double rho = spearman_rho(hs, tl_means);
    c.expect(rho > 0.9, "error grows with the deviation size (Spearman rho = " +
                            format_double(rho) + ")");
    note = "rho=" + format_double(rho);
}

void criterion_sim2(Checker& c) {
    SimSpec spec = default_sim_spec("sim2");
    spec.settings = {{5, 10, 3, 3}};
    spec.p_list = {1};
    spec.h_grid = {0.5};
    spec.T0_grid = {50, 100, 200, 300};
    spec.replications = 50;
    spec.methods = {"TL", "MLR"};
    spec.seed = 20260817;
    spec.threads = 0;
    const auto rows = run_sim2(spec);

    const auto key_T0 = [](const MetricsRow& r) { return static_cast<double>(r.T0); };
    const auto tl = mean_by(rows, "TL", key_T0);
    const auto mlr = mean_by(rows, "MLR", key_T0);
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& [T0, m] : tl) {
        c.expect(m < prev, "transfer error not decreasing at T0 = " + format_double(T0));
        prev = m;
    }
    c.expect(tl.at(50.0) <= mlr.at(50.0), "transfer no worse than multilinear fit at T0 = 50");
}

void criterion_sim3(Checker& c) {
    SimSpec spec = default_sim_spec("sim3");
    spec.settings = {{0, 20, 5, 5}};
    spec.p_list = {1};
    spec.h_grid = {0.0, 0.5, 1.0};
    spec.K_grid = {5, 50};
    spec.replications = 30;
    spec.methods = {"TL"};
    spec.seed = 20260818;
    spec.threads = 0;
    const auto rows = run_sim3(spec);

    for (double h : spec.h_grid) {
        std::map<long long, double> sums;
        std::map<long long, long long> counts;
        for (const auto& r : rows)
            if (r.h == h) {
                sums[r.K] += r.value;
                counts[r.K] += 1;
            }
        const double small = sums.at(5) / static_cast<double>(counts.at(5));
        const double large = sums.at(50) / static_cast<double>(counts.at(50));
        c.expect(large < small, "more sources did not reduce the error at h = " + format_double(h));
    }
}

void criterion_real_data(Checker& c, std::string& status, std::string& note) {
    const char* cfg = std::getenv("TLVAR_REAL_DATA");
    if (cfg == nullptr || std::string(cfg).empty()) {
        status = "SKIP";
        note = "set TLVAR_REAL_DATA to a forecast config to enable";
        return;
    }
    namespace fs = std::filesystem;
    const fs::path out = fs::temp_directory_path() / "tlvar_acceptance_real";
    fs::remove_all(out);

    CliOptions opt;
    opt.verb = "forecast";
    opt.config_path = cfg;
    opt.out_dir = out.string();
    opt.threads = 0;
    run_cli_config(opt);

    const auto rmsfe_by_method = csv_metric(slurp(out / "results.csv"), "rmsfe");
    const double tl = rmsfe_by_method.at("TL");
    const double pool = rmsfe_by_method.at("Pool");
    const double mlr = rmsfe_by_method.at("MLR");
    c.expect(tl < pool, "transfer holdout error not below pooling");
    c.expect(tl < mlr, "transfer holdout error not below the multilinear fit");
    // Expected holdout error for the reference dataset, checked loosely.
    const double expected = 4.836;
    c.expect(std::abs(tl - expected) <= 0.15 * expected,
             "transfer holdout error " + format_double(tl) + " outside " +
                 format_double(expected) + " +/- 15%");
    note = "TL rmsfe = " + format_double(tl);
    fs::remove_all(out);
}

void criterion_determinism(Checker& c) {
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "tlvar_acceptance_det";
    fs::remove_all(base);
    fs::create_directories(base);

    const fs::path cfg_path = base / "sim.json";
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({"experiment": "sim1", "settings": [[3, 6, 2, 2]], "p": [1],
                   "h_grid": [0.0, 0.5], "T0": 50, "T_src": 100,
                   "methods": ["TL", "VAR"], "replications": 3, "seed": 11})";
    }
    CliOptions opt;
    opt.verb = "simulate";
    opt.config_path = cfg_path.string();
    opt.out_dir = (base / "a").string();
    opt.threads = 1;
    run_cli_config(opt);
    opt.out_dir = (base / "b").string();
    opt.threads = 4;
    run_cli_config(opt);
    opt.out_dir = (base / "c").string();
    opt.threads = 1;
    run_cli_config(opt);

    const std::string ra = slurp(base / "a" / "results.csv");
    c.expect(!ra.empty(), "simulate produced no results");
    c.expect(ra == slurp(base / "b" / "results.csv"),
             "simulate results differ across thread counts");
    c.expect(ra == slurp(base / "c" / "results.csv"), "simulate results differ across reruns");

    // Forecast verb: same panels, two runs, identical bytes.
    SimDesign d;
    d.K = 2;
    d.N = 4;
    d.p = 1;
    d.s1 = 2;
    d.s2 = 2;
    d.s3 = 1;
    d.h = 0.5;
    d.T0 = 60;
    d.T_src = 80;
    d.seed = 23;
    const DesignDraw draw = generate_design(d);
    ForecastSpec fspec;
    fspec.target = simulate(draw.procs[0], d.T0, 200, derive_seed(23, 7, 0));
    for (int k = 1; k <= d.K; ++k)
        fspec.sources.push_back(simulate(draw.procs[static_cast<std::size_t>(k)], d.T_src, 200,
                                         derive_seed(23, 7, static_cast<std::uint64_t>(k))));
    fspec.p = 1;
    fspec.test_len = 5;
    fspec.methods = {"TL", "VAR"};
    fspec.common_ranks = std::array<Eigen::Index, 3>{2, 2, 1};
    fspec.c_S = 0.5;
    fspec.c_T = 0.5;
    write_results_csv((base / "f1.csv").string(), run_forecast(fspec));
    write_results_csv((base / "f2.csv").string(), run_forecast(fspec));
    c.expect(slurp(base / "f1.csv") == slurp(base / "f2.csv"),
             "forecast results differ across reruns");

    fs::remove_all(base);
}

}  // namespace

int main() {
    struct Entry {
        int id;
        std::string label;
        double limit_seconds;  // <= 0: no runtime bound
        std::function<void(Checker&, std::string&, std::string&)> run;
    };

    const std::vector<Entry> entries = {
        {1, "tensor core properties (220 instances)", 10.0,
         [](Checker& c, std::string&, std::string&) { criterion_tensor_core(c); }},
        {2, "gradients vs central finite differences (32 instances)", 30.0,
         [](Checker& c, std::string&, std::string&) { criterion_gradients(c); }},
        {3, "closed-form and coordinate-descent oracles", 0.0,
         [](Checker& c, std::string&, std::string&) { criterion_oracles(c); }},
        {4, "monotone penalized objectives (50-run battery)", 0.0,
         [](Checker& c, std::string&, std::string&) { criterion_monotone(c); }},
        {5, "estimation error ordering and growth in the deviation size", 1200.0,
         [](Checker& c, std::string&, std::string& note) { criterion_sim1(c, note); }},
        {6, "estimation error decreasing in the target sample size", 0.0,
         [](Checker& c, std::string&, std::string&) { criterion_sim2(c); }},
        {7, "estimation error decreasing in the number of sources", 0.0,
         [](Checker& c, std::string&, std::string&) { criterion_sim3(c); }},
        {8, "observed-data forecast harness", 0.0,
         [](Checker& c, std::string& status, std::string& note) {
             criterion_real_data(c, status, note);
         }},
        {9, "byte-identical results under fixed seeds", 0.0,
         [](Checker& c, std::string&, std::string&) { criterion_determinism(c); }},
    };

    bool any_fail = false;
    for (const auto& e : entries) {
        Checker c;
        std::string status = "PASS";
        std::string note;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            e.run(c, status, note);
        } catch (const std::exception& ex) {
            c.failures.push_back(std::string("exception: ") + ex.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (e.limit_seconds > 0.0 && secs > e.limit_seconds)
            c.failures.push_back("runtime " + format_double(secs) + " s exceeded " +
                                 format_double(e.limit_seconds) + " s");
        if (!c.failures.empty()) status = "FAIL";
        if (status == "FAIL") any_fail = true;

        std::ostringstream line;
        line << "criterion " << e.id << ": " << status << " " << e.label;
        std::ostringstream extra;
        if (!note.empty()) extra << note;
        if (status != "SKIP") {
            if (extra.tellp() > 0) extra << "; ";
            extra << format_double(secs) << " s";
        }
        if (!c.failures.empty()) {
            if (extra.tellp() > 0) extra << "; ";
            extra << join_failures(c.failures);
        }
        if (extra.tellp() > 0) line << " (" << extra.str() << ")";
        std::cout << line.str() << std::endl;
    }
    return any_fail ? 1 : 0;
}
