// SPDX-License-Identifier: MIT
//
// Config-driven experiment harness: simulation sweeps, rolling-forecast
// comparisons, and deterministic long-format result serialization.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tlvar/estimator.hpp"
#include "tlvar/selection.hpp"
#include "tlvar/var.hpp"

namespace tlvar {

inline constexpr const char* kVersion = "0.1.0";

// One long-format result line. Fields that do not apply to a row are left at
// their "absent" values (-1 for integers, NaN for h) and serialize to empty
// cells; a genuinely failed fit records the value NaN.
struct MetricsRow {
    std::string experiment;
    long long K = -1, N = -1, p = -1;
    long long s1 = -1, s2 = -1, s3 = -1;
    double h = std::numeric_limits<double>::quiet_NaN();
    long long T0 = -1, T_src = -1;
    std::string method;
    long long replication = -1;
    std::uint64_t seed = 0;
    std::string metric;
    double value = std::numeric_limits<double>::quiet_NaN();
};

// Shortest round-trip decimal form via std::to_chars; locale-independent,
// hence safe for byte-identical output requirements.
std::string format_double(double v);

// Writes the canonical header plus one line per row.
void write_results_csv(const std::string& path, const std::vector<MetricsRow>& rows);

struct SimSpec {
    std::string experiment = "sim1";  // sim1 | sim2 | sim3
    std::vector<std::array<int, 4>> settings;  // (K, N, s1, s2); sim1/sim2 sweeps
    std::vector<int> p_list{1, 4};
    std::vector<double> h_grid;  // sim1: 0..2 by 0.25; sim2: {0.5}; sim3: 0..1 by 0.25
    std::vector<int> T0_grid;    // sim2 only: 50..300 by 50
    std::vector<int> K_grid;     // sim3 only: {5, 10, 50}
    int T0 = 100;
    int T_src = 300;
    std::vector<std::string> methods{"TL", "Pool", "MLR", "VAR"};
    int replications = 50;
    std::uint64_t seed = 1;
    double c_S = 1.0, c_T = 1.0;
    Eigen::Index burn_in = kDefaultBurnIn;
    int threads = 0;  // 0 = hardware concurrency
};

// Fills experiment-specific grids/settings that the caller left empty.
SimSpec default_sim_spec(const std::string& experiment);

// Simulation sweeps. Row order is canonical (cell, then method, then
// replication) and independent of the thread count; per-replication seeds are
// derived from the master seed, the cell index, and the replication index.
std::vector<MetricsRow> run_sim1(SimSpec spec);
std::vector<MetricsRow> run_sim2(SimSpec spec);
std::vector<MetricsRow> run_sim3(SimSpec spec);

struct ForecastSpec {
    Panel target;
    std::vector<Panel> sources;
    Eigen::Index p = 1;
    Eigen::Index test_len = 20;
    Eigen::Index validation_len = 20;  // holdout for hyperparameter search
    std::vector<std::string> methods{"TL", "Pool", "Initial", "MLR", "VAR", "Sparse"};
    std::optional<std::array<Eigen::Index, 3>> common_ranks;  // else rule-selected
    RankRule rule = RankRule::elbow;
    double tau = 0.75;
    Eigen::Index r_max = -1;
    std::optional<double> c_S, c_T;  // unset = validated / tied
    std::vector<double> c_grid{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
    std::vector<double> lasso_grid{0.1, 0.3, 0.5, 0.7, 0.9};
    std::optional<std::array<Eigen::Index, 3>> mlr_ranks;  // else ridge-ratio selected
    PenaltyConfig cfg;
    std::uint64_t seed = 1;
};

// Rolling one-step forecasts over the target's last test_len points for every
// configured method; emits RMSFE and MAFE rows per method. Shared
// representations are fit once on the sources; only the target model is
// re-estimated at each origin.
std::vector<MetricsRow> run_forecast(const ForecastSpec& spec);

// Config-file driven entry point used by the command-line tool. Reads the
// JSON config, dispatches on the experiment kind (the verb must agree),
// writes results.csv / fit.json / selection.json plus manifest.json into
// out_dir.
struct CliOptions {
    std::string verb;  // simulate | fit | forecast | select
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> replications;
    int threads = 0;
};
void run_cli_config(const CliOptions& opt);

}  // namespace tlvar
