// SPDX-License-Identifier: MIT
#include "tlvar/forecast.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>

namespace tlvar {

double rmse_tensor(const Tensor3& estimate, const Tensor3& truth) {
    if (!estimate.same_dims(truth))
        throw std::invalid_argument("rmse_tensor: tensor dimensions differ");
    return (estimate - truth).frobenius_norm();
}

std::vector<ForecastRecord> rolling_forecast(const Panel& data, Eigen::Index p,
                                             const FitFunction& fit, Eigen::Index test_len,
                                             RefitPolicy policy) {
    const Eigen::Index N = data.Y.rows(), total = data.Y.cols();
    if (test_len < 1) throw std::invalid_argument("rolling_forecast: test_len must be >= 1");
    if (total - test_len < p + 1)
        throw std::invalid_argument(
            "rolling_forecast: test span leaves too few training observations");

    const auto predict = [&](const Eigen::MatrixXd& A1, Eigen::Index t) {
        Eigen::VectorXd x(N * p);
        for (Eigen::Index j = 1; j <= p; ++j) x.segment((j - 1) * N, N) = data.Y.col(t - j);
        return (A1 * x).eval();
    };

    std::vector<ForecastRecord> records;
    records.reserve(static_cast<std::size_t>(test_len));

    Eigen::MatrixXd fixed_A1;
    bool fixed_ok = false;
    std::string fixed_message;
    if (policy == RefitPolicy::none) {
        try {
            fixed_A1 = fit({data.id, data.Y.leftCols(total - test_len), data.names});
            fixed_ok = true;
        } catch (const std::exception& e) {
            fixed_message = e.what();
        }
    }

    for (Eigen::Index t = total - test_len; t < total; ++t) {
        ForecastRecord rec;
        rec.origin = t;
        if (policy == RefitPolicy::none) {
            if (fixed_ok) {
                rec.ok = true;
                rec.error = data.Y.col(t) - predict(fixed_A1, t);
            } else {
                rec.message = fixed_message;
            }
        } else {
            try {
                const Eigen::MatrixXd A1 = fit({data.id, data.Y.leftCols(t), data.names});
                if (A1.rows() != N || A1.cols() != N * p)
                    throw std::invalid_argument(
                        "rolling_forecast: fit returned a misshapen transition matrix");
                rec.ok = true;
                rec.error = data.Y.col(t) - predict(A1, t);
            } catch (const std::exception& e) {
                rec.message = e.what();
            }
        }
        records.push_back(std::move(rec));
    }
    return records;
}

double rmsfe(const std::vector<ForecastRecord>& records) {
    double sq = 0.0;
    Eigen::Index n = 0;
    for (const auto& r : records)
        if (r.ok) {
            sq += r.error.squaredNorm();
            ++n;
        }
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(sq / static_cast<double>(n));
}

double mafe(const std::vector<ForecastRecord>& records) {
    double abs_sum = 0.0;
    Eigen::Index n = 0;
    for (const auto& r : records)
        if (r.ok) {
            abs_sum += r.error.lpNorm<1>();
            n += r.error.size();
        }
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    return abs_sum / static_cast<double>(n);
}

}  // namespace tlvar
