// SPDX-License-Identifier: MIT
#include "tlvar/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>
#include <utility>

#include <json.hpp>

#include "tlvar/baselines.hpp"
#include "tlvar/data.hpp"
#include "tlvar/errors.hpp"
#include "tlvar/forecast.hpp"
#include "tlvar/rng.hpp"
#include "tlvar/selection.hpp"
#include "tlvar/sim_design.hpp"
#include "tlvar/transfer.hpp"

namespace tlvar {

namespace {

using nlohmann::json;

// Stream index for per-panel noise seeds; larger than any stream id used
// inside generate_design so panel draws never collide with design draws.
constexpr std::uint64_t kPanelStream = 10007;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Thread pool helper: run fn(0..n-1) on `threads` workers (0 = hardware).
// First exception wins and is rethrown on the calling thread.
// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!err) err = std::current_exception();
                next.store(n);  // drain remaining work
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------------------
// Simulation cells
// ---------------------------------------------------------------------------

struct SimCell {
    int K = 0;
    int N = 0;
    int p = 1;
    int s1 = 0;
    int s2 = 0;
    int s3 = 1;
    double h = 0.0;
    int T0 = 0;
    int T_src = 0;
};

const std::vector<std::string> kSimMethods = {"TL", "Pool", "Initial", "MLR", "VAR"};
const std::vector<std::string> kForecastMethods = {"TL", "Pool", "Initial", "MLR", "VAR", "Sparse"};

bool known_method(const std::vector<std::string>& allowed, const std::string& m) {
    return std::find(allowed.begin(), allowed.end(), m) != allowed.end();
}

void validate_sim_spec(const SimSpec& spec) {
    if (spec.experiment != "sim1" && spec.experiment != "sim2" && spec.experiment != "sim3")
        throw config_error("simulate: experiment must be one of sim1, sim2, sim3");
    if (spec.settings.empty()) throw config_error("simulate: settings must be non-empty");
    if (spec.p_list.empty()) throw config_error("simulate: p list must be non-empty");
    for (int p : spec.p_list)
        if (p < 1) throw config_error("simulate: lag order must be >= 1");
    if (spec.h_grid.empty()) throw config_error("simulate: h grid must be non-empty");
    for (double h : spec.h_grid)
        if (!(h >= 0.0)) throw config_error("simulate: h values must be >= 0");
    if (spec.experiment == "sim2" && spec.T0_grid.empty())
        throw config_error("simulate: sim2 requires a T0 grid");
    if (spec.experiment == "sim3" && spec.K_grid.empty())
        throw config_error("simulate: sim3 requires a K grid");
    if (spec.methods.empty()) throw config_error("simulate: methods must be non-empty");
    for (const auto& m : spec.methods)
        if (!known_method(kSimMethods, m))
            throw config_error("simulate: unknown method '" + m + "'");
    if (spec.replications < 1) throw config_error("simulate: replications must be >= 1");
    if (!(spec.c_S > 0.0) || !(spec.c_T > 0.0))
        throw config_error("simulate: penalty constants must be > 0");
    if (spec.T0 < 1 || spec.T_src < 1)
        throw config_error("simulate: sample sizes must be >= 1");
    if (spec.burn_in < 0) throw config_error("simulate: burn_in must be >= 0");
    if (spec.threads < 0) throw config_error("simulate: threads must be >= 0");
}

// Common ranks for the shared structure: the third mode collapses when p = 1.
int third_rank(int p) { return p > 1 ? 3 : 1; }

std::vector<SimCell> build_cells(const SimSpec& spec) {
    std::vector<SimCell> cells;
    auto push = [&](int K, int N, int s1, int s2, int p, double h, int T0) {
        SimCell c;
        c.K = K;
        c.N = N;
        c.p = p;
        c.s1 = s1;
        c.s2 = s2;
        c.s3 = third_rank(p);
        c.h = h;
        c.T0 = T0;
        c.T_src = spec.T_src;
        cells.push_back(c);
    };
    if (spec.experiment == "sim1") {
        for (const auto& st : spec.settings)
            for (int p : spec.p_list)
                for (double h : spec.h_grid) push(st[0], st[1], st[2], st[3], p, h, spec.T0);
    } else if (spec.experiment == "sim2") {
        for (const auto& st : spec.settings)
            for (int p : spec.p_list)
                for (int T0 : spec.T0_grid)
                    for (double h : spec.h_grid) push(st[0], st[1], st[2], st[3], p, h, T0);
    } else {  // sim3: K varies, the (N, s1, s2) setting is shared
        const auto& st = spec.settings.front();
        for (int K : spec.K_grid)
            for (int p : spec.p_list)
                for (double h : spec.h_grid) push(K, st[1], st[2], st[3], p, h, spec.T0);
    }
    return cells;
}

// Fit one method on simulated data; throws on failure.
Tensor3 fit_sim_method(const std::string& method, const std::vector<Panel>& sources,
                       const Panel& target, const SimCell& cell, const SimSpec& spec,
                       const InitBundle* bundle) {
    const std::array<Eigen::Index, 3> ranks = {cell.s1, cell.s2, cell.s3};
    if (method == "TL") {
        TransferOptions topt;
        topt.common_ranks = ranks;
        topt.c_S = spec.c_S;
        topt.c_T = spec.c_T;
        return fit_transfer(sources, target, cell.p, topt, bundle).fit.A0;
    }
    if (method == "Pool") {
        PenaltyConfig cfg;
        return pool_var(sources, target, cell.p, ranks, {}, cfg, bundle).A0;
    }
    if (method == "Initial") {
        std::vector<Eigen::Index> T_src(sources.size(), cell.T_src);
        const LambdaSchedule sched =
            lambda_schedule(spec.c_S, spec.c_T, cell.N, cell.p, T_src, cell.T0);
        PenaltyConfig cfg;
        InitOptions io;
        io.common_ranks = ranks;
        return initial_var(sources, target, cell.p, sched.lambda0, cfg, io, bundle).A0;
    }
    if (method == "MLR") {
        const std::array<Eigen::Index, 3> mlr_ranks = {2, 2, cell.p > 1 ? 2 : 1};
        return fit_mlr_var(target, cell.p, mlr_ranks);
    }
    if (method == "VAR") return ols_var(target, cell.p);
    throw config_error("simulate: unknown method '" + method + "'");
}

// One (cell, replication) job: returns one row per method, in config order.
std::vector<MetricsRow> run_replication(const SimCell& cell, long long rep,
                                        std::uint64_t rep_seed, const SimSpec& spec) {
    std::vector<MetricsRow> rows;
    rows.reserve(spec.methods.size());
    for (const auto& m : spec.methods) {
        MetricsRow r;
        r.experiment = spec.experiment;
        r.K = cell.K;
        r.N = cell.N;
        r.p = cell.p;
        r.s1 = cell.s1;
        r.s2 = cell.s2;
        r.s3 = cell.s3;
        r.h = cell.h;
        r.T0 = cell.T0;
        r.T_src = cell.T_src;
        r.method = m;
        r.replication = rep;
        r.seed = rep_seed;
        r.metric = "rmse";
        r.value = kNaN;
        rows.push_back(std::move(r));
    }
    try {
        SimDesign design;
        design.K = cell.K;
        design.N = cell.N;
        design.p = cell.p;
        design.s1 = cell.s1;
        design.s2 = cell.s2;
        design.s3 = cell.s3;
        design.h = cell.h;
        design.T0 = cell.T0;
        design.T_src = cell.T_src;
        design.seed = rep_seed;
        const DesignDraw draw = generate_design(design);

        const Panel target =
            simulate(draw.procs[0], cell.T0, spec.burn_in, derive_seed(rep_seed, kPanelStream, 0));
        std::vector<Panel> sources;
        sources.reserve(cell.K);
        for (int k = 1; k <= cell.K; ++k)
            sources.push_back(simulate(draw.procs[static_cast<std::size_t>(k)], cell.T_src,
                                       spec.burn_in,
                                       derive_seed(rep_seed, kPanelStream, static_cast<std::uint64_t>(k))));
        const Tensor3& truth = draw.tasks[0].A;

        const bool needs_bundle =
            std::any_of(spec.methods.begin(), spec.methods.end(), [](const std::string& m) {
                return m == "TL" || m == "Pool" || m == "Initial";
            });
        std::optional<InitBundle> bundle;
        if (needs_bundle) {
            InitOptions io;
            // Generated tasks load two columns of each pool, so their own
            // multilinear ranks are known; data-driven rank selection is for
            // observed panels, not for the controlled sweeps.
            io.task_ranks = std::array<Eigen::Index, 3>{2, 2, cell.p > 1 ? 2 : 1};
            io.common_ranks = std::array<Eigen::Index, 3>{cell.s1, cell.s2, cell.s3};
            bundle = initialize_all(sources, cell.p, {}, io);
        }

        for (std::size_t m = 0; m < spec.methods.size(); ++m) {
            try {
                const Tensor3 est = fit_sim_method(spec.methods[m], sources, target, cell, spec,
                                                   bundle ? &*bundle : nullptr);
                rows[m].value = rmse_tensor(est, truth);
            } catch (const std::exception&) {
                // failed fit: value stays NaN, row is still emitted
            }
        }
    } catch (const std::exception&) {
        // design or panel generation failed: all rows stay NaN
    }
    return rows;
}

std::vector<MetricsRow> run_sim(SimSpec spec) {
    // Fill empty grids from the per-experiment defaults so partially
    // specified configs behave predictably.
    const SimSpec defaults = default_sim_spec(spec.experiment);
    if (spec.settings.empty()) spec.settings = defaults.settings;
    if (spec.p_list.empty()) spec.p_list = defaults.p_list;
    if (spec.h_grid.empty()) spec.h_grid = defaults.h_grid;
    if (spec.T0_grid.empty()) spec.T0_grid = defaults.T0_grid;
    if (spec.K_grid.empty()) spec.K_grid = defaults.K_grid;
    if (spec.methods.empty()) spec.methods = defaults.methods;
    validate_sim_spec(spec);

    const std::vector<SimCell> cells = build_cells(spec);
    const std::size_t R = static_cast<std::size_t>(spec.replications);
    const std::size_t M = spec.methods.size();
    std::vector<std::vector<MetricsRow>> slots(cells.size() * R);
    parallel_for(slots.size(), spec.threads, [&](std::size_t idx) {
        const std::size_t cell_i = idx / R;
        const std::size_t rep = idx % R;
        const std::uint64_t rep_seed = derive_seed(spec.seed, cell_i, rep);
        slots[idx] = run_replication(cells[cell_i], static_cast<long long>(rep), rep_seed, spec);
    });

    // Canonical emission order: cell -> method -> replication.
    std::vector<MetricsRow> rows;
    rows.reserve(cells.size() * R * M);
    for (std::size_t ci = 0; ci < cells.size(); ++ci)
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t rep = 0; rep < R; ++rep)
                rows.push_back(std::move(slots[ci * R + rep][m]));
    return rows;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public simulation entry points
// ---------------------------------------------------------------------------

SimSpec default_sim_spec(const std::string& experiment) {
    SimSpec s;
    s.experiment = experiment;
    s.settings = {{5, 10, 3, 3}, {10, 10, 3, 3}, {10, 20, 3, 3}, {10, 20, 5, 5}};
    s.p_list = {1, 4};
    if (experiment == "sim1") {
        for (int i = 0; i <= 8; ++i) s.h_grid.push_back(0.25 * i);
    } else if (experiment == "sim2") {
        s.h_grid = {0.5};
        s.T0_grid = {50, 100, 150, 200, 250, 300};
    } else if (experiment == "sim3") {
        s.settings = {{0, 20, 5, 5}};  // K comes from K_grid
        for (int i = 0; i <= 4; ++i) s.h_grid.push_back(0.25 * i);
        s.K_grid = {5, 10, 50};
        s.methods = {"TL"};
    } else {
        throw config_error("simulate: experiment must be one of sim1, sim2, sim3");
    }
    return s;
}

std::vector<MetricsRow> run_sim1(SimSpec spec) {
    spec.experiment = "sim1";
    return run_sim(std::move(spec));
}

std::vector<MetricsRow> run_sim2(SimSpec spec) {
    spec.experiment = "sim2";
    return run_sim(std::move(spec));
}

std::vector<MetricsRow> run_sim3(SimSpec spec) {
    spec.experiment = "sim3";
    return run_sim(std::move(spec));
}

// ---------------------------------------------------------------------------
// Forecast comparison on observed data
// ---------------------------------------------------------------------------

std::vector<MetricsRow> run_forecast(const ForecastSpec& spec) {
    const Eigen::Index N = spec.target.Y.rows();
    if (N < 1) throw data_error("forecast: target panel is empty");
    for (const auto& s : spec.sources)
        if (s.Y.rows() != N)
            throw data_error("forecast: source panel '" + s.id +
                             "' has a different variable count than the target");
    if (spec.p < 1) throw config_error("forecast: lag order must be >= 1");
    if (spec.test_len < 1) throw config_error("forecast: test_len must be >= 1");
    if (spec.methods.empty()) throw config_error("forecast: methods must be non-empty");
    for (const auto& m : spec.methods)
        if (!known_method(kForecastMethods, m))
            throw config_error("forecast: unknown method '" + m + "'");
    if (spec.target.Y.cols() <= spec.test_len + spec.p)
        throw data_error("forecast: target panel too short for the requested test span");

    const Eigen::Index p = spec.p;
    const bool has_tl_family =
        std::any_of(spec.methods.begin(), spec.methods.end(), [](const std::string& m) {
            return m == "TL" || m == "Pool" || m == "Initial";
        });

    // Shared representation built once from all source data.
    std::optional<InitBundle> bundle;
    std::array<Eigen::Index, 3> ranks = {0, 0, 0};
    double c_S = 1.0;
    double c_T = 1.0;
    InitOptions io;
    io.rule = spec.rule;
    io.tau = spec.tau;
    io.r_max = spec.r_max;
    if (spec.common_ranks) io.common_ranks = *spec.common_ranks;
    if (has_tl_family) {
        if (spec.sources.empty())
            throw config_error("forecast: TL, Pool, and Initial need at least one source panel");
        bundle = initialize_all(spec.sources, p, {}, io);
        ranks = bundle->s_ranks;
        const bool needs_c = std::any_of(spec.methods.begin(), spec.methods.end(),
                                         [](const std::string& m) { return m == "TL" || m == "Initial"; });
        if (needs_c) {
            if (spec.c_S) {
                c_S = *spec.c_S;
            } else {
                if (spec.validation_len < 1)
                    throw config_error("forecast: validation_len must be >= 1");
                ValidationProtocol proto;
                proto.p = static_cast<int>(p);
                proto.init = io;
                proto.init.common_ranks = ranks;  // pin ranks so validation reuses them
                proto.cfg = spec.cfg;
                c_S = select_c_by_validation(spec.sources, spec.c_grid, spec.validation_len, proto);
            }
            c_T = spec.c_T ? *spec.c_T : c_S;
        }
    }

    std::vector<Eigen::Index> T_src;
    T_src.reserve(spec.sources.size());
    for (const auto& s : spec.sources) T_src.push_back(s.Y.cols() - p);

    // Target window preceding the test span (used for rank / lambda selection).
    Panel pre_test = spec.target;
    pre_test.Y = spec.target.Y.leftCols(spec.target.Y.cols() - spec.test_len).eval();

    // Per-method forecaster factories; each returns a FitFunction mapping an
    // expanding target window to a mode-1 coefficient matrix.
    auto make_fit = [&](const std::string& method) -> FitFunction {
        if (method == "TL") {
            const LambdaSchedule sched = lambda_schedule(c_S, c_T, N, p, T_src, 1);
            PenaltyConfig cfg = spec.cfg;
            cfg.lambda = sched.lambda;
            cfg.weights.clear();
            cfg.eta.clear();
            auto stage1 = std::make_shared<Stage1Result>(
                stage1_fit(make_task_data(spec.sources, p), ranks, cfg, initial_state(*bundle)));
            const double cT = c_T;
            const PenaltyConfig base = spec.cfg;
            return [stage1, cT, N, p, base](const Panel& window) {
                const Eigen::Index T0 = window.Y.cols() - p;
                const double lambda0 =
                    cT * std::sqrt((static_cast<double>(N) * N * p + N * std::log(static_cast<double>(N))) /
                                   static_cast<double>(T0));
                PenaltyConfig cfg0 = base;
                cfg0.lambda.clear();
                cfg0.weights.clear();
                cfg0.eta.clear();
                const TransferFit fit =
                    stage2_fit(window, stage1->U, stage1->V, stage1->L, lambda0, cfg0);
                return matricize(fit.A0, 1);
            };
        }
        if (method == "Pool") {
            PenaltyConfig cfg = spec.cfg;
            cfg.lambda = {0.0};
            cfg.weights.clear();
            cfg.eta.clear();
            auto stage1 = std::make_shared<Stage1Result>(
                stage1_fit(make_task_data(spec.sources, p), ranks, cfg, initial_state(*bundle), true));
            const PenaltyConfig base = spec.cfg;
            return [stage1, base](const Panel& window) {
                PenaltyConfig cfg0 = base;
                cfg0.lambda.clear();
                cfg0.weights.clear();
                cfg0.eta.clear();
                const TransferFit fit =
                    stage2_fit(window, stage1->U, stage1->V, stage1->L, 0.0, cfg0, true);
                return matricize(fit.A0, 1);
            };
        }
        if (method == "Initial") {
            auto U0 = std::make_shared<Eigen::MatrixXd>(bundle->U0);
            auto V0 = std::make_shared<Eigen::MatrixXd>(bundle->V0);
            auto L0 = std::make_shared<Eigen::MatrixXd>(bundle->L0);
            const double cT = c_T;
            const PenaltyConfig base = spec.cfg;
            return [U0, V0, L0, cT, N, p, base](const Panel& window) {
                const Eigen::Index T0 = window.Y.cols() - p;
                const double lambda0 =
                    cT * std::sqrt((static_cast<double>(N) * N * p + N * std::log(static_cast<double>(N))) /
                                   static_cast<double>(T0));
                PenaltyConfig cfg0 = base;
                cfg0.lambda.clear();
                cfg0.weights.clear();
                cfg0.eta.clear();
                const TransferFit fit = stage2_fit(window, *U0, *V0, *L0, lambda0, cfg0);
                return matricize(fit.A0, 1);
            };
        }
        if (method == "MLR") {
            std::array<Eigen::Index, 3> mlr_ranks{};
            if (spec.mlr_ranks) {
                mlr_ranks = *spec.mlr_ranks;
            } else {
                mlr_ranks = select_ranks_ridge_ratio(pre_test, static_cast<int>(p));
            }
            const int pi = static_cast<int>(p);
            return [mlr_ranks, pi](const Panel& window) {
                return matricize(fit_mlr_var(window, pi, mlr_ranks), 1);
            };
        }
        if (method == "VAR") {
            const int pi = static_cast<int>(p);
            return [pi](const Panel& window) { return matricize(ols_var(window, pi), 1); };
        }
        if (method == "Sparse") {
            if (spec.lasso_grid.empty())
                throw config_error("forecast: Sparse needs a non-empty lasso grid");
            if (spec.validation_len < 1)
                throw config_error("forecast: validation_len must be >= 1");
            const double lambda =
                select_lasso_lambda(pre_test, static_cast<int>(p), spec.lasso_grid, spec.validation_len);
            const int pi = static_cast<int>(p);
            return [lambda, pi](const Panel& window) {
                return matricize(sparse_var_lasso(window, pi, lambda), 1);
            };
        }
        throw config_error("forecast: unknown method '" + method + "'");
    };

    std::vector<MetricsRow> rows;
    for (const auto& method : spec.methods) {
        MetricsRow base;
        base.experiment = "forecast";
        base.K = static_cast<long long>(spec.sources.size());
        base.N = N;
        base.p = p;
        if (method == "TL" || method == "Pool" || method == "Initial") {
            base.s1 = ranks[0];
            base.s2 = ranks[1];
            base.s3 = ranks[2];
        }
        base.method = method;
        base.replication = 0;
        base.seed = spec.seed;

        double rm = kNaN;
        double ma = kNaN;
        try {
            const FitFunction fit = make_fit(method);
            const auto result = rolling_forecast(spec.target, static_cast<int>(p), fit, spec.test_len);
            rm = rmsfe(result);
            ma = mafe(result);
        } catch (const std::exception&) {
            // method setup failed: both metrics stay NaN
        }
        MetricsRow r1 = base;
        r1.metric = "rmsfe";
        r1.value = rm;
        rows.push_back(std::move(r1));
        MetricsRow r2 = base;
        r2.metric = "mafe";
        r2.value = ma;
        rows.push_back(std::move(r2));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// results.csv
// ---------------------------------------------------------------------------

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::string int_field(long long v) { return v < 0 ? std::string() : std::to_string(v); }

std::string h_field(double v) { return std::isnan(v) ? std::string() : format_double(v); }

}  // namespace

void write_results_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open '" + path + "' for writing");
    out << "experiment,K,N,p,s1,s2,s3,h,T0,T_src,method,replication,seed,metric,value\n";
    for (const auto& r : rows) {
        out << r.experiment << ',' << int_field(r.K) << ',' << int_field(r.N) << ','
            << int_field(r.p) << ',' << int_field(r.s1) << ',' << int_field(r.s2) << ','
            << int_field(r.s3) << ',' << h_field(r.h) << ',' << int_field(r.T0) << ','
            << int_field(r.T_src) << ',' << r.method << ',' << int_field(r.replication) << ','
            << std::to_string(r.seed) << ',' << r.metric << ',' << format_double(r.value) << '\n';
    }
    if (!out) throw data_error("failed while writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// JSON config front end
// ---------------------------------------------------------------------------

namespace {

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw config_error(std::string("config: ") + e.what());
    }
}

[[noreturn]] void bad_field(const std::string& key, const char* expected) {
    throw config_error("config: field '" + key + "' must be " + expected);
}

long long get_int(const json& j, const std::string& key) {
    if (!j.at(key).is_number_integer()) bad_field(key, "an integer");
    return j.at(key).get<long long>();
}

double get_num(const json& j, const std::string& key) {
    if (!j.at(key).is_number()) bad_field(key, "a number");
    return j.at(key).get<double>();
}

std::string get_str(const json& j, const std::string& key) {
    if (!j.at(key).is_string()) bad_field(key, "a string");
    return j.at(key).get<std::string>();
}

std::vector<int> get_int_list(const json& j, const std::string& key) {
    const json& v = j.at(key);
    std::vector<int> out;
    if (v.is_number_integer()) {
        out.push_back(v.get<int>());
    } else if (v.is_array()) {
        for (const auto& e : v) {
            if (!e.is_number_integer()) bad_field(key, "an integer or array of integers");
            out.push_back(e.get<int>());
        }
    } else {
        bad_field(key, "an integer or array of integers");
    }
    return out;
}

std::vector<double> get_num_list(const json& j, const std::string& key) {
    const json& v = j.at(key);
    std::vector<double> out;
    if (v.is_number()) {
        out.push_back(v.get<double>());
    } else if (v.is_array()) {
        for (const auto& e : v) {
            if (!e.is_number()) bad_field(key, "a number or array of numbers");
            out.push_back(e.get<double>());
        }
    } else {
        bad_field(key, "a number or array of numbers");
    }
    return out;
}

std::vector<std::string> get_str_list(const json& j, const std::string& key) {
    const json& v = j.at(key);
    if (!v.is_array()) bad_field(key, "an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) bad_field(key, "an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

std::array<Eigen::Index, 3> get_ranks3(const json& j, const std::string& key) {
    const std::vector<int> v = get_int_list(j, key);
    if (v.size() != 3) bad_field(key, "an array of 3 integers");
    return {v[0], v[1], v[2]};
}

SimSpec parse_sim_spec(const json& cfg, const CliOptions& opt) {
    if (!cfg.contains("experiment"))
        throw config_error("config: simulate needs an 'experiment' field (sim1, sim2, sim3)");
    SimSpec spec = default_sim_spec(get_str(cfg, "experiment"));
    if (cfg.contains("settings")) {
        const json& st = cfg.at("settings");
        if (!st.is_array() || st.empty()) bad_field("settings", "an array of [K, N, s1, s2]");
        spec.settings.clear();
        for (const auto& e : st) {
            if (!e.is_array() || e.size() != 4) bad_field("settings", "an array of [K, N, s1, s2]");
            std::array<int, 4> s{};
            for (std::size_t i = 0; i < 4; ++i) {
                if (!e[i].is_number_integer()) bad_field("settings", "an array of [K, N, s1, s2]");
                s[i] = e[i].get<int>();
            }
            spec.settings.push_back(s);
        }
    }
    if (cfg.contains("p")) spec.p_list = get_int_list(cfg, "p");
    if (cfg.contains("h_grid"))
        spec.h_grid = get_num_list(cfg, "h_grid");
    else if (cfg.contains("h"))
        spec.h_grid = get_num_list(cfg, "h");
    if (cfg.contains("T0_grid")) {
        spec.T0_grid.clear();
        for (int t : get_int_list(cfg, "T0_grid")) spec.T0_grid.push_back(t);
    }
    if (cfg.contains("K_grid")) {
        spec.K_grid.clear();
        for (int k : get_int_list(cfg, "K_grid")) spec.K_grid.push_back(k);
    }
    if (cfg.contains("T0")) spec.T0 = static_cast<int>(get_int(cfg, "T0"));
    if (cfg.contains("T_src")) spec.T_src = static_cast<int>(get_int(cfg, "T_src"));
    if (cfg.contains("methods")) spec.methods = get_str_list(cfg, "methods");
    if (cfg.contains("replications"))
        spec.replications = static_cast<int>(get_int(cfg, "replications"));
    if (cfg.contains("seed")) spec.seed = static_cast<std::uint64_t>(get_int(cfg, "seed"));
    if (cfg.contains("c_S")) spec.c_S = get_num(cfg, "c_S");
    if (cfg.contains("c_T")) spec.c_T = get_num(cfg, "c_T");
    if (cfg.contains("burn_in")) spec.burn_in = static_cast<int>(get_int(cfg, "burn_in"));
    if (opt.seed) spec.seed = *opt.seed;
    if (opt.replications) spec.replications = static_cast<int>(*opt.replications);
    spec.threads = opt.threads;
    return spec;
}

// Load a panel entry: {"path": ..., "codes": int|[int...], "standardize": bool}.
Panel load_panel_entry(const json& entry) {
    if (entry.is_string()) return load_csv(entry.get<std::string>());
    if (!entry.is_object() || !entry.contains("path"))
        throw config_error("config: panel entries must be a path string or an object with 'path'");
    Panel raw = load_csv(get_str(entry, "path"));
    if (entry.contains("codes")) {
        TransformSpec ts;
        const std::vector<int> codes = get_int_list(entry, "codes");
        if (codes.size() == 1) {
            ts.codes.assign(static_cast<std::size_t>(raw.Y.rows()), codes[0]);
        } else {
            ts.codes = codes;
        }
        if (entry.contains("standardize")) {
            if (!entry.at("standardize").is_boolean()) bad_field("standardize", "a boolean");
            ts.standardize = entry.at("standardize").get<bool>();
        }
        raw = preprocess(raw, ts).panel;
    }
    return raw;
}

ForecastSpec parse_forecast_spec(const json& cfg, const CliOptions& opt) {
    ForecastSpec spec;
    if (!cfg.contains("target")) throw config_error("config: forecast needs a 'target' panel");
    spec.target = load_panel_entry(cfg.at("target"));
    if (cfg.contains("sources")) {
        const json& src = cfg.at("sources");
        if (!src.is_array()) bad_field("sources", "an array of panel entries");
        for (const auto& e : src) spec.sources.push_back(load_panel_entry(e));
    }
    if (cfg.contains("p")) spec.p = static_cast<Eigen::Index>(get_int(cfg, "p"));
    if (cfg.contains("test_len")) spec.test_len = static_cast<Eigen::Index>(get_int(cfg, "test_len"));
    if (cfg.contains("validation_len"))
        spec.validation_len = static_cast<Eigen::Index>(get_int(cfg, "validation_len"));
    if (cfg.contains("methods")) spec.methods = get_str_list(cfg, "methods");
    if (cfg.contains("common_ranks")) spec.common_ranks = get_ranks3(cfg, "common_ranks");
    if (cfg.contains("rank_rule")) {
        const std::string rule = get_str(cfg, "rank_rule");
        if (rule == "threshold")
            spec.rule = RankRule::threshold;
        else if (rule == "elbow")
            spec.rule = RankRule::elbow;
        else
            bad_field("rank_rule", "'threshold' or 'elbow'");
    }
    if (cfg.contains("tau")) spec.tau = get_num(cfg, "tau");
    if (cfg.contains("r_max")) spec.r_max = static_cast<int>(get_int(cfg, "r_max"));
    if (cfg.contains("c_S")) spec.c_S = get_num(cfg, "c_S");
    if (cfg.contains("c_T")) spec.c_T = get_num(cfg, "c_T");
    if (cfg.contains("c_grid")) spec.c_grid = get_num_list(cfg, "c_grid");
    if (cfg.contains("lasso_grid")) spec.lasso_grid = get_num_list(cfg, "lasso_grid");
    if (cfg.contains("mlr_ranks")) spec.mlr_ranks = get_ranks3(cfg, "mlr_ranks");
    if (cfg.contains("seed")) spec.seed = static_cast<std::uint64_t>(get_int(cfg, "seed"));
    if (opt.seed) spec.seed = *opt.seed;
    return spec;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json out;
    out["rows"] = m.rows();
    out["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) data.push_back(m(i, j));
    out["data"] = data;  // column-major
    return out;
}

json tensor_to_json(const Tensor3& t) {
    json out;
    out["dims"] = {t.d1(), t.d2(), t.d3()};
    std::vector<double> data(t.data().data(), t.data().data() + t.size());
    out["data"] = data;  // first index fastest
    return out;
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << '\n';
}

std::size_t count_failures(const std::vector<MetricsRow>& rows) {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const MetricsRow& r) { return std::isnan(r.value); }));
}

}  // namespace

void run_cli_config(const CliOptions& opt) {
    const auto t_start = std::chrono::steady_clock::now();
    const json cfg = load_config(opt.config_path);
    const std::filesystem::path out_dir(opt.out_dir);
    std::filesystem::create_directories(out_dir);

    json manifest;
    manifest["tool"] = "tlvar";
    manifest["version"] = kVersion;
    manifest["verb"] = opt.verb;
    manifest["config"] = cfg;
    manifest["threads"] = opt.threads;
    std::vector<std::string> outputs;

    if (opt.verb == "simulate") {
        const SimSpec spec = parse_sim_spec(cfg, opt);
        std::vector<MetricsRow> rows;
        if (spec.experiment == "sim1")
            rows = run_sim1(spec);
        else if (spec.experiment == "sim2")
            rows = run_sim2(spec);
        else
            rows = run_sim3(spec);
        write_results_csv((out_dir / "results.csv").string(), rows);
        outputs.push_back("results.csv");
        manifest["experiment"] = spec.experiment;
        manifest["seed"] = spec.seed;
        manifest["replications"] = spec.replications;
        manifest["rows"] = rows.size();
        manifest["failures"] = count_failures(rows);
    } else if (opt.verb == "forecast") {
        const ForecastSpec spec = parse_forecast_spec(cfg, opt);
        const std::vector<MetricsRow> rows = run_forecast(spec);
        write_results_csv((out_dir / "results.csv").string(), rows);
        outputs.push_back("results.csv");
        manifest["seed"] = spec.seed;
        manifest["rows"] = rows.size();
        manifest["failures"] = count_failures(rows);
    } else if (opt.verb == "fit") {
        ForecastSpec spec = parse_forecast_spec(cfg, opt);
        if (spec.sources.empty()) throw config_error("config: fit needs at least one source panel");
        TransferOptions topt;
        if (spec.common_ranks) topt.common_ranks = *spec.common_ranks;
        topt.init.rule = spec.rule;
        topt.init.tau = spec.tau;
        topt.init.r_max = spec.r_max;
        topt.cfg = spec.cfg;
        if (spec.c_S) {
            topt.c_S = *spec.c_S;
        } else if (cfg.contains("c_grid")) {
            ValidationProtocol proto;
            proto.p = static_cast<int>(spec.p);
            proto.init = topt.init;
            proto.cfg = spec.cfg;
            topt.c_S = select_c_by_validation(spec.sources, spec.c_grid, spec.validation_len, proto);
        }
        topt.c_T = spec.c_T ? *spec.c_T : topt.c_S;
        const TransferResult res = fit_transfer(spec.sources, spec.target, static_cast<int>(spec.p), topt);

        json out;
        out["ranks"] = {res.init.s_ranks[0], res.init.s_ranks[1], res.init.s_ranks[2]};
        out["c_S"] = topt.c_S;
        out["c_T"] = topt.c_T;
        out["lambda"] = res.schedule.lambda;
        out["lambda0"] = res.schedule.lambda0;
        out["U"] = matrix_to_json(res.fit.U);
        out["V"] = matrix_to_json(res.fit.V);
        out["L"] = matrix_to_json(res.fit.L);
        out["D0"] = tensor_to_json(res.fit.D0);
        out["R0"] = tensor_to_json(res.fit.R0);
        out["A0"] = tensor_to_json(res.fit.A0);
        out["objective_trace"] = res.fit.objective_trace;
        out["iterations"] = res.fit.iterations;
        out["stage1_iterations"] = res.stage1.state.iterations;
        write_json(out_dir / "fit.json", out);
        outputs.push_back("fit.json");
        manifest["seed"] = spec.seed;
    } else if (opt.verb == "select") {
        ForecastSpec spec = parse_forecast_spec(cfg, opt);
        if (spec.sources.empty())
            throw config_error("config: select needs at least one source panel");
        ValidationProtocol proto;
        proto.p = static_cast<int>(spec.p);
        proto.init.rule = spec.rule;
        proto.init.tau = spec.tau;
        proto.init.r_max = spec.r_max;
        if (spec.common_ranks) proto.init.common_ranks = *spec.common_ranks;
        proto.cfg = spec.cfg;
        const double c = select_c_by_validation(spec.sources, spec.c_grid, spec.validation_len, proto);
        json out;
        out["c_S"] = c;
        if (cfg.contains("lasso_grid")) {
            out["lasso_lambda"] = select_lasso_lambda(spec.target, static_cast<int>(spec.p),
                                                      spec.lasso_grid, spec.validation_len);
        }
        write_json(out_dir / "selection.json", out);
        outputs.push_back("selection.json");
    } else {
        throw config_error("unknown verb '" + opt.verb + "'");
    }

    const auto t_end = std::chrono::steady_clock::now();
    manifest["wall_seconds"] = std::chrono::duration<double>(t_end - t_start).count();
    manifest["outputs"] = outputs;
    write_json(out_dir / "manifest.json", manifest);
}

}  // namespace tlvar
