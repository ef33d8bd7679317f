// SPDX-License-Identifier: MIT
//
// Python module exposing the core operations: tensor algebra, VAR simulation,
// the two-stage transfer estimator with its baselines, rank selection, data
// ingestion, rolling forecasts, and the config-driven experiment runner.
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "tlvar/baselines.hpp"
#include "tlvar/data.hpp"
#include "tlvar/errors.hpp"
#include "tlvar/experiments.hpp"
#include "tlvar/forecast.hpp"
#include "tlvar/selection.hpp"
#include "tlvar/sim_design.hpp"
#include "tlvar/tensor.hpp"
#include "tlvar/transfer.hpp"
#include "tlvar/var.hpp"

namespace py = pybind11;

namespace pybind11::detail {

// Tensor3 <-> numpy. The tensor buffer is mode-1 fastest, i.e. exactly a
// Fortran-ordered (d1, d2, d3) array of doubles, so both directions are a
// single copy with no index shuffling.
template <>
struct type_caster<tlvar::Tensor3> {
    PYBIND11_TYPE_CASTER(tlvar::Tensor3, const_name("numpy.ndarray"));

    bool load(handle src, bool) {
        auto arr = array_t<double, array::f_style | array::forcecast>::ensure(src);
        if (!arr || arr.ndim() != 3) return false;
        value = tlvar::Tensor3(arr.shape(0), arr.shape(1), arr.shape(2));
        if (value.size() > 0)
            std::memcpy(value.data().data(), arr.data(),
                        sizeof(double) * static_cast<size_t>(value.size()));
        return true;
    }

    static handle cast(const tlvar::Tensor3& t, return_value_policy, handle) {
        array_t<double, array::f_style> arr({t.d1(), t.d2(), t.d3()});
        if (t.size() > 0)
            std::memcpy(arr.mutable_data(), t.data().data(),
                        sizeof(double) * static_cast<size_t>(t.size()));
        return arr.release();
    }
};

}  // namespace pybind11::detail

namespace {

tlvar::RankRule parse_rule(const std::string& s) {
    if (s == "threshold") return tlvar::RankRule::threshold;
    if (s == "elbow") return tlvar::RankRule::elbow;
    throw tlvar::config_error("unknown rank rule: " + s + " (expected threshold or elbow)");
}

tlvar::RefitPolicy parse_refit(const std::string& s) {
    if (s == "per_origin") return tlvar::RefitPolicy::per_origin;
    if (s == "none") return tlvar::RefitPolicy::none;
    throw tlvar::config_error("unknown refit policy: " + s + " (expected per_origin or none)");
}

tlvar::PenaltyConfig make_cfg(double a, double b, int max_outer, int max_inner, double tol) {
    tlvar::PenaltyConfig cfg;
    cfg.a = a;
    cfg.b = b;
    cfg.max_outer = max_outer;
    cfg.max_inner = max_inner;
    cfg.tol = tol;
    return cfg;
}

tlvar::InitOptions make_init_options(Eigen::Index r_max,
                                     std::optional<std::array<Eigen::Index, 3>> task_ranks,
                                     std::optional<std::array<Eigen::Index, 3>> common_ranks,
                                     const std::string& rule, double tau) {
    tlvar::InitOptions opt;
    opt.r_max = r_max;
    opt.task_ranks = task_ranks;
    opt.common_ranks = common_ranks;
    opt.rule = parse_rule(rule);
    opt.tau = tau;
    return opt;
}

}  // namespace

PYBIND11_MODULE(_tlvar, m) {
    using namespace tlvar;

    m.doc() = "Transfer learning for VAR models via shared low-rank representations";
    m.attr("__version__") = kVersion;

    py::register_exception<config_error>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<data_error>(m, "DataError", PyExc_ValueError);
    py::register_exception<numerical_error>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<Panel>(m, "Panel", "Observed series: variables in rows, time in columns")
        .def(py::init([](Eigen::MatrixXd Y, std::string id, std::vector<std::string> names) {
                 return Panel{std::move(id), std::move(Y), std::move(names)};
             }),
             py::arg("Y"), py::arg("id") = "", py::arg("names") = std::vector<std::string>{})
        .def_readwrite("id", &Panel::id)
        .def_readwrite("Y", &Panel::Y)
        .def_readwrite("names", &Panel::names)
        .def("__repr__", [](const Panel& p) {
            return "Panel(id='" + p.id + "', " + std::to_string(p.Y.rows()) + " x " +
                   std::to_string(p.Y.cols()) + ")";
        });

    // ---- tensor algebra -------------------------------------------------
    m.def("matricize", &matricize, py::arg("t"), py::arg("mode"),
          "Mode-s matricization of a (d1, d2, d3) array");
    m.def("fold", &fold, py::arg("m"), py::arg("mode"), py::arg("d1"), py::arg("d2"),
          py::arg("d3"), "Inverse of matricize for the given target dims");
    m.def("mode_product", &mode_product, py::arg("t"), py::arg("m"), py::arg("mode"),
          "Contract mode `mode` of t with the columns of m");
    m.def("tucker_product", &tucker_product, py::arg("core"), py::arg("U"), py::arg("V"),
          py::arg("L"), "core x1 U x2 V x3 L");
    m.def(
        "hosvd",
        [](const Tensor3& t, Eigen::Index r1, Eigen::Index r2, Eigen::Index r3) {
            TuckerFactors f = hosvd(t, r1, r2, r3);
            return py::make_tuple(f.core, f.U, f.V, f.L);
        },
        py::arg("t"), py::arg("r1"), py::arg("r2"), py::arg("r3"),
        "Truncated higher-order SVD; returns (core, U, V, L)");

    // ---- VAR processes ---------------------------------------------------
    m.def("companion_matrix", &companion_matrix, py::arg("A"),
          "Np x Np block companion matrix of an N x N x p transition tensor");
    m.def("spectral_radius", &spectral_radius, py::arg("M"));
    m.def("is_stationary", &is_stationary, py::arg("A"), py::arg("margin") = 0.0,
          "True iff the companion spectral radius is < 1 - margin");
    m.def(
        "simulate",
        [](const Tensor3& A, Eigen::Index T, Eigen::Index burn_in, std::uint64_t seed,
           std::optional<Eigen::MatrixXd> noise_cov, std::string id) {
            VarProcess proc;
            proc.N = A.d1();
            proc.p = A.d3();
            proc.A = A;
            proc.noise_cov = noise_cov ? std::move(*noise_cov)
                                       : Eigen::MatrixXd::Identity(A.d1(), A.d1());
            Panel out = simulate(proc, T, burn_in, seed);
            out.id = std::move(id);
            return out;
        },
        py::arg("A"), py::arg("T"), py::arg("burn_in") = kDefaultBurnIn, py::arg("seed") = 1,
        py::arg("noise_cov") = py::none(), py::arg("id") = "",
        py::call_guard<py::gil_scoped_release>(),
        "Simulate T + p columns of a VAR(p) with Gaussian innovations");
    m.def(
        "lag_design",
        [](const Panel& panel, Eigen::Index p) {
            LagDesign d = lag_design(panel, p);
            return py::make_tuple(std::move(d.Y), std::move(d.X));
        },
        py::arg("panel"), py::arg("p"),
        "Regression pair (Y, X) with Y = A_(1) X for noiseless data from A");

    // ---- synthetic multi-task designs -------------------------------------
    py::class_<SimDesign>(m, "SimDesign", "Coefficient-generation settings for K+1 tasks")
        .def(py::init([](int K, int N, int p, int s1, int s2, int s3, double h, int T0,
                         int T_src, std::uint64_t seed) {
                 return SimDesign{K, N, p, s1, s2, s3, h, T0, T_src, seed};
             }),
             py::arg("K") = 5, py::arg("N") = 10, py::arg("p") = 1, py::arg("s1") = 3,
             py::arg("s2") = 3, py::arg("s3") = 1, py::arg("h") = 0.0, py::arg("T0") = 100,
             py::arg("T_src") = 300, py::arg("seed") = 1)
        .def_readwrite("K", &SimDesign::K)
        .def_readwrite("N", &SimDesign::N)
        .def_readwrite("p", &SimDesign::p)
        .def_readwrite("s1", &SimDesign::s1)
        .def_readwrite("s2", &SimDesign::s2)
        .def_readwrite("s3", &SimDesign::s3)
        .def_readwrite("h", &SimDesign::h)
        .def_readwrite("T0", &SimDesign::T0)
        .def_readwrite("T_src", &SimDesign::T_src)
        .def_readwrite("seed", &SimDesign::seed);

    py::class_<TaskTruth>(m, "TaskTruth", "One task's true coefficients")
        .def_readonly("R", &TaskTruth::R)
        .def_readonly("A", &TaskTruth::A);

    py::class_<DesignDraw>(m, "DesignDraw", "Drawn pools and per-task truths (index 0 = target)")
        .def_readonly("U", &DesignDraw::U)
        .def_readonly("V", &DesignDraw::V)
        .def_readonly("L", &DesignDraw::L)
        .def_readonly("tasks", &DesignDraw::tasks)
        .def_readonly("rejections", &DesignDraw::rejections);

    m.def("generate_design", &generate_design, py::arg("design"),
          py::call_guard<py::gil_scoped_release>(),
          "Draw shared pools and K+1 stationary task coefficient tensors");

    // ---- data ingestion ----------------------------------------------------
    py::class_<PreprocessInfo>(m, "PreprocessInfo")
        .def_readonly("codes", &PreprocessInfo::codes)
        .def_readonly("mean", &PreprocessInfo::mean)
        .def_readonly("scale", &PreprocessInfo::scale)
        .def_readonly("rows_dropped", &PreprocessInfo::rows_dropped);

    m.def("load_csv", &load_csv, py::arg("path"),
          "Read a headered CSV (time labels first column) into a Panel");
    m.def(
        "preprocess",
        [](const Panel& raw, std::vector<int> codes, bool standardize) {
            PreprocessResult r = preprocess(raw, TransformSpec{std::move(codes), standardize});
            return py::make_tuple(std::move(r.panel), std::move(r.info));
        },
        py::arg("panel"), py::arg("codes"), py::arg("standardize") = true,
        "Apply per-variable difference/log-difference codes; returns (panel, info)");

    // ---- rank selection and initialization --------------------------------
    py::class_<InitBundle>(m, "InitBundle", "Aggregated starting representations")
        .def_readonly("U0", &InitBundle::U0)
        .def_readonly("V0", &InitBundle::V0)
        .def_readonly("L0", &InitBundle::L0)
        .def_readonly("s_ranks", &InitBundle::s_ranks)
        .def_readonly("eigvals_u", &InitBundle::eigvals_u)
        .def_readonly("eigvals_v", &InitBundle::eigvals_v)
        .def_readonly("eigvals_l", &InitBundle::eigvals_l)
        .def_readonly("task_ranks", &InitBundle::task_ranks)
        .def_readonly("fitted", &InitBundle::fitted)
        .def_readonly("weights", &InitBundle::weights);

    m.def("select_ranks_ridge_ratio", &select_ranks_ridge_ratio, py::arg("panel"), py::arg("p"),
          py::arg("r_max") = -1, py::arg("ridge") = -1.0,
          py::call_guard<py::gil_scoped_release>(),
          "Ridge-ratio selection of per-mode multilinear ranks");
    m.def("fit_mlr_var", &fit_mlr_var, py::arg("panel"), py::arg("p"), py::arg("ranks"),
          py::arg("max_iter") = 100, py::arg("tol") = 1e-8,
          py::call_guard<py::gil_scoped_release>(),
          "Multilinear low-rank VAR fit by alternating least squares");
    m.def(
        "initialize_all",
        [](const std::vector<Panel>& sources, Eigen::Index p, std::vector<double> weights,
           Eigen::Index r_max, std::optional<std::array<Eigen::Index, 3>> task_ranks,
           std::optional<std::array<Eigen::Index, 3>> common_ranks, const std::string& rule,
           double tau) {
            return initialize_all(sources, p, weights,
                                  make_init_options(r_max, task_ranks, common_ranks, rule, tau));
        },
        py::arg("sources"), py::arg("p"), py::arg("weights") = std::vector<double>{},
        py::arg("r_max") = -1, py::arg("task_ranks") = py::none(),
        py::arg("common_ranks") = py::none(), py::arg("rule") = "threshold",
        py::arg("tau") = 0.75, py::call_guard<py::gil_scoped_release>(),
        "Per-source low-rank fits, subspace aggregation, and common rank selection");

    py::class_<LambdaSchedule>(m, "LambdaSchedule")
        .def_readonly("c_S", &LambdaSchedule::c_S)
        .def_readonly("c_T", &LambdaSchedule::c_T)
        .def_readonly("lambdas", &LambdaSchedule::lambda)
        .def_readonly("lambda0", &LambdaSchedule::lambda0);

    m.def("lambda_schedule", &lambda_schedule, py::arg("c_S"), py::arg("c_T"), py::arg("N"),
          py::arg("p"), py::arg("T"), py::arg("T0"),
          "Deviation penalty levels for the source tasks and the target");

    // ---- estimators --------------------------------------------------------
    py::class_<TransferFit>(m, "TransferFit", "Target-side estimate and representations")
        .def_readonly("U", &TransferFit::U)
        .def_readonly("V", &TransferFit::V)
        .def_readonly("L", &TransferFit::L)
        .def_readonly("D0", &TransferFit::D0)
        .def_readonly("R0", &TransferFit::R0)
        .def_readonly("A0", &TransferFit::A0)
        .def_readonly("objective_trace", &TransferFit::objective_trace)
        .def_readonly("iterations", &TransferFit::iterations);

    py::class_<Stage1Result>(m, "Stage1Result", "Joint representation fit over the sources")
        .def_readonly("U", &Stage1Result::U)
        .def_readonly("V", &Stage1Result::V)
        .def_readonly("L", &Stage1Result::L)
        .def_readonly("objective_trace", &Stage1Result::objective_trace)
        .def_property_readonly("iterations",
                               [](const Stage1Result& r) { return r.state.iterations; });

    py::class_<TransferResult>(m, "TransferResult", "Full two-stage pipeline output")
        .def_readonly("fit", &TransferResult::fit)
        .def_readonly("stage1", &TransferResult::stage1)
        .def_readonly("init", &TransferResult::init)
        .def_readonly("schedule", &TransferResult::schedule);

    m.def(
        "fit_transfer",
        [](const std::vector<Panel>& sources, const Panel& target, Eigen::Index p,
           std::optional<std::array<Eigen::Index, 3>> common_ranks, double c_S, double c_T,
           std::vector<double> weights, Eigen::Index r_max,
           std::optional<std::array<Eigen::Index, 3>> task_ranks, const std::string& rule,
           double tau, double a, double b, int max_outer, int max_inner, double tol) {
            TransferOptions opt;
            if (common_ranks) opt.common_ranks = *common_ranks;
            opt.c_S = c_S;
            opt.c_T = c_T;
            opt.weights = std::move(weights);
            opt.init = make_init_options(r_max, task_ranks, common_ranks, rule, tau);
            opt.cfg = make_cfg(a, b, max_outer, max_inner, tol);
            return fit_transfer(sources, target, p, opt);
        },
        py::arg("sources"), py::arg("target"), py::arg("p"), py::arg("common_ranks") = py::none(),
        py::arg("c_S") = 1.0, py::arg("c_T") = 1.0, py::arg("weights") = std::vector<double>{},
        py::arg("r_max") = -1, py::arg("task_ranks") = py::none(),
        py::arg("rule") = "threshold", py::arg("tau") = 0.75, py::arg("a") = 1.0,
        py::arg("b") = 1.0, py::arg("max_outer") = 200, py::arg("max_inner") = 50,
        py::arg("tol") = 1e-6, py::call_guard<py::gil_scoped_release>(),
        "Two-stage transfer fit: joint source representation learning, then the "
        "penalized target fit");
    m.def(
        "stage2_fit",
        [](const Panel& target, const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
           const Eigen::MatrixXd& L, double lambda0, bool freeze_R, double a, double b,
           int max_outer, int max_inner, double tol) {
            return stage2_fit(target, U, V, L, lambda0, make_cfg(a, b, max_outer, max_inner, tol),
                              freeze_R);
        },
        py::arg("target"), py::arg("U"), py::arg("V"), py::arg("L"), py::arg("lambda0"),
        py::arg("freeze_R") = false, py::arg("a") = 1.0, py::arg("b") = 1.0,
        py::arg("max_outer") = 200, py::arg("max_inner") = 50, py::arg("tol") = 1e-6,
        py::call_guard<py::gil_scoped_release>(),
        "Target fit against fixed representations (order p = L.shape[0])");
    m.def("ols_var", &ols_var, py::arg("panel"), py::arg("p"),
          py::call_guard<py::gil_scoped_release>(), "Unrestricted least-squares VAR estimate");
    m.def(
        "pool_var",
        [](const std::vector<Panel>& sources, const Panel& target, Eigen::Index p,
           std::array<Eigen::Index, 3> ranks, std::vector<double> weights, double a, double b,
           int max_outer, int max_inner, double tol) {
            return pool_var(sources, target, p, ranks, weights,
                            make_cfg(a, b, max_outer, max_inner, tol));
        },
        py::arg("sources"), py::arg("target"), py::arg("p"), py::arg("ranks"),
        py::arg("weights") = std::vector<double>{}, py::arg("a") = 1.0, py::arg("b") = 1.0,
        py::arg("max_outer") = 200, py::arg("max_inner") = 50, py::arg("tol") = 1e-6,
        py::call_guard<py::gil_scoped_release>(),
        "Exact transfer: every deviation frozen at zero (infinite-penalty limit)");
    m.def(
        "initial_var",
        [](const std::vector<Panel>& sources, const Panel& target, Eigen::Index p,
           double lambda0, Eigen::Index r_max,
           std::optional<std::array<Eigen::Index, 3>> task_ranks,
           std::optional<std::array<Eigen::Index, 3>> common_ranks, const std::string& rule,
           double tau, double a, double b, int max_outer, int max_inner, double tol) {
            return initial_var(sources, target, p, lambda0,
                               make_cfg(a, b, max_outer, max_inner, tol),
                               make_init_options(r_max, task_ranks, common_ranks, rule, tau));
        },
        py::arg("sources"), py::arg("target"), py::arg("p"), py::arg("lambda0"),
        py::arg("r_max") = -1, py::arg("task_ranks") = py::none(),
        py::arg("common_ranks") = py::none(), py::arg("rule") = "threshold",
        py::arg("tau") = 0.75, py::arg("a") = 1.0, py::arg("b") = 1.0,
        py::arg("max_outer") = 200, py::arg("max_inner") = 50, py::arg("tol") = 1e-6,
        py::call_guard<py::gil_scoped_release>(),
        "Transfer fit using the aggregated initial representations as-is");
    m.def("sparse_var_lasso", &sparse_var_lasso, py::arg("panel"), py::arg("p"), py::arg("lam"),
          py::arg("max_iter") = 200000, py::call_guard<py::gil_scoped_release>(),
          "l1-penalized VAR by accelerated proximal gradient");
    m.def("select_lasso_lambda", &select_lasso_lambda, py::arg("panel"), py::arg("p"),
          py::arg("grid"), py::arg("holdout_len"), py::call_guard<py::gil_scoped_release>(),
          "Holdout grid search for the lasso level");

    // ---- forecasting -------------------------------------------------------
    py::class_<ForecastRecord>(m, "ForecastRecord")
        .def_readonly("origin", &ForecastRecord::origin)
        .def_readonly("ok", &ForecastRecord::ok)
        .def_readonly("error", &ForecastRecord::error)
        .def_readonly("message", &ForecastRecord::message);

    m.def("rmse_tensor", &rmse_tensor, py::arg("estimate"), py::arg("truth"),
          "Frobenius distance between transition tensors");
    m.def(
        "rolling_forecast",
        [](const Panel& data, Eigen::Index p, const FitFunction& fit, Eigen::Index test_len,
           const std::string& refit) {
            return rolling_forecast(data, p, fit, test_len, parse_refit(refit));
        },
        py::arg("data"), py::arg("p"), py::arg("fit"), py::arg("test_len"),
        py::arg("refit") = "per_origin",
        "One-step forecasts of the last test_len columns; fit(train_panel) must "
        "return the N x Np mode-1 transition matrix");
    m.def("rmsfe", &rmsfe, py::arg("records"),
          "sqrt(mean squared error norm) over successful origins");
    m.def("mafe", &mafe, py::arg("records"),
          "Mean absolute error over (variable, successful origin) pairs");

    // ---- experiment runner ---------------------------------------------------
    m.def(
        "run_cli_config",
        [](const std::string& verb, const std::string& config, const std::string& out_dir,
           std::optional<std::uint64_t> seed, std::optional<int> replications, int threads) {
            CliOptions opt;
            opt.verb = verb;
            opt.config_path = config;
            opt.out_dir = out_dir;
            opt.seed = seed;
            opt.replications = replications;
            opt.threads = threads;
            run_cli_config(opt);
        },
        py::arg("verb"), py::arg("config"), py::arg("out_dir") = ".",
        py::arg("seed") = py::none(), py::arg("replications") = py::none(),
        py::arg("threads") = 0, py::call_guard<py::gil_scoped_release>(),
        "Config-file driven entry point (simulate | fit | forecast | select); "
        "writes results and a manifest into out_dir");
}
