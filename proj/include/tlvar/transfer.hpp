// SPDX-License-Identifier: MIT
//
// End-to-end two-stage transfer fit: initialization, joint representation
// learning on the sources, and the penalized target fit.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "tlvar/estimator.hpp"
#include "tlvar/selection.hpp"
#include "tlvar/var.hpp"

namespace tlvar {

struct TransferOptions {
    // Common representation ranks; {0,0,0} delegates to the init rank rule.
    std::array<Eigen::Index, 3> common_ranks{0, 0, 0};
    double c_S = 1.0;  // source deviation penalty constant
    double c_T = 1.0;  // target deviation penalty constant
    PenaltyConfig cfg;            // solver knobs; lambda/weights/eta are derived
    InitOptions init;             // rank-selection knobs
    std::vector<double> weights;  // empty = sample-size proportional
};

struct TransferResult {
    TransferFit fit;  // target-side estimate and representations
    Stage1Result stage1;
    InitBundle init;
    LambdaSchedule schedule;
};

// Runs the full pipeline. A precomputed initialization bundle (matching the
// requested ranks) may be supplied to share work across fits of the same
// sources.
TransferResult fit_transfer(const std::vector<Panel>& sources, const Panel& target,
                            Eigen::Index p, const TransferOptions& opt,
                            const InitBundle* init = nullptr);

}  // namespace tlvar
