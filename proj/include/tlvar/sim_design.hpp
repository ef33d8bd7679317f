// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <vector>

#include "tlvar/tensor.hpp"
#include "tlvar/var.hpp"

namespace tlvar {

// Coefficient-generation settings for the synthetic multi-task experiments.
// K source tasks plus one target share column pools U (N x s1), V (N x s2)
// and L (p x s3); each task draws a rank-(2,2,2) core on two columns of each
// pool and a deviation of Frobenius norm h orthogonal to all three pools.
// For p = 1 the temporal factors collapse to the scalar 1 and s3 must be 1.
struct SimDesign {
    int K = 5;
    int N = 10;
    int p = 1;
    int s1 = 3;
    int s2 = 3;
    int s3 = 1;
    double h = 0.0;
    int T0 = 100;
    int T_src = 300;
    std::uint64_t seed = 1;
};

struct TaskTruth {
    TuckerFactors low_rank;  // per-task D_k with its own U_k, V_k, L_k columns
    Tensor3 R;               // deviation, Frobenius norm h
    Tensor3 A;               // assembled transition tensor
};

struct DesignDraw {
    Eigen::MatrixXd U, V, L;       // shared column pools
    std::vector<TaskTruth> tasks;  // index 0 is the target, 1..K the sources
    std::vector<VarProcess> procs;
    int rejections = 0;            // non-stationary draws discarded
};

// Draws the task coefficients. Non-stationary candidates are rejected and the
// per-task pieces redrawn (the shared pools stay fixed); more than 1000
// attempts for one task raises numerical_error.
[[nodiscard]] DesignDraw generate_design(const SimDesign& d);

}  // namespace tlvar
