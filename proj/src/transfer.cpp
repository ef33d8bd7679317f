// SPDX-License-Identifier: MIT
#include "tlvar/transfer.hpp"

#include <stdexcept>

namespace tlvar {

TransferResult fit_transfer(const std::vector<Panel>& sources, const Panel& target,
                            Eigen::Index p, const TransferOptions& opt,
                            const InitBundle* init) {
    if (sources.empty()) throw std::invalid_argument("fit_transfer: no source panels");
    const Eigen::Index N = target.Y.rows();
    for (const auto& s : sources)
        if (s.Y.rows() != N)
            throw std::invalid_argument("fit_transfer: sources and target must share N");

    InitOptions io = opt.init;
    const bool fixed_ranks = opt.common_ranks != std::array<Eigen::Index, 3>{0, 0, 0};
    if (fixed_ranks) io.common_ranks = opt.common_ranks;

    TransferResult res;
    res.init = init ? *init : initialize_all(sources, p, opt.weights, io);
    if (fixed_ranks && res.init.s_ranks != opt.common_ranks)
        throw std::invalid_argument("fit_transfer: initialization ranks disagree with request");

    std::vector<Eigen::Index> T_sources;
    T_sources.reserve(sources.size());
    for (const auto& s : sources) T_sources.push_back(s.Y.cols() - p);
    const Eigen::Index T0 = target.Y.cols() - p;
    if (T0 < 1) throw std::invalid_argument("fit_transfer: target panel too short");
    res.schedule = lambda_schedule(opt.c_S, opt.c_T, N, p, T_sources, T0);

    PenaltyConfig cfg = opt.cfg;
    cfg.lambda = res.schedule.lambda;
    cfg.weights = opt.weights;
    cfg.eta.clear();
    const std::vector<TaskData> tasks = make_task_data(sources, p);
    res.stage1 = stage1_fit(tasks, res.init.s_ranks, cfg, initial_state(res.init));

    PenaltyConfig target_cfg = opt.cfg;
    target_cfg.lambda = {res.schedule.lambda0};
    target_cfg.weights.clear();
    target_cfg.eta.clear();
    res.fit = stage2_fit(target, res.stage1.U, res.stage1.V, res.stage1.L,
                         res.schedule.lambda0, target_cfg);
    return res;
}

}  // namespace tlvar
