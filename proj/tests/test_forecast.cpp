// SPDX-License-Identifier: MIT
#include <doctest.h>

#include <cmath>
#include <vector>

#include "tlvar/errors.hpp"
#include "tlvar/forecast.hpp"
#include "tlvar/rng.hpp"

using namespace tlvar;

TEST_CASE("tensor error metric is the Frobenius distance") {
    Tensor3 a(2, 2, 1), b(2, 2, 1);
    a(0, 0, 0) = 3.0;
    b(1, 1, 0) = 4.0;
    CHECK(rmse_tensor(a, b) == doctest::Approx(5.0));
    CHECK(rmse_tensor(a, a) == 0.0);
    Tensor3 c(3, 3, 1);
    CHECK_THROWS_AS((void)rmse_tensor(a, c), std::invalid_argument);
}

TEST_CASE("rolling forecasts against a hand-computed schedule") {
    // Panel of one variable: 1, 2, 3, ..., 8. A frozen fit B = [0.5] predicts
    // 0.5 * previous value; the one-step error at value v is v - 0.5 (v - 1).
    Panel pan;
    pan.Y.resize(1, 8);
    pan.Y << 1, 2, 3, 4, 5, 6, 7, 8;

    std::vector<Eigen::Index> train_cols;
    const FitFunction fit = [&](const Panel& train) {
        train_cols.push_back(train.Y.cols());
        Eigen::MatrixXd B(1, 1);
        B << 0.5;
        return B;
    };

    const auto recs = rolling_forecast(pan, 1, fit, 3, RefitPolicy::per_origin);
    REQUIRE(recs.size() == 3);
    // Origins are the last 3 columns: indices 5, 6, 7 with values 6, 7, 8.
    CHECK(recs[0].origin == 5);
    CHECK(recs[2].origin == 7);
    // Expanding window: 5, then 6, then 7 training columns.
    REQUIRE(train_cols.size() == 3);
    CHECK(train_cols[0] == 5);
    CHECK(train_cols[1] == 6);
    CHECK(train_cols[2] == 7);
    for (const auto& r : recs) CHECK(r.ok);
    CHECK(recs[0].error(0) == doctest::Approx(6.0 - 2.5));
    CHECK(recs[1].error(0) == doctest::Approx(7.0 - 3.0));
    CHECK(recs[2].error(0) == doctest::Approx(8.0 - 3.5));

    // Pooled metrics over the recorded errors.
    const double e1 = 3.5, e2 = 4.0, e3 = 4.5;
    CHECK(rmsfe(recs) == doctest::Approx(std::sqrt((e1 * e1 + e2 * e2 + e3 * e3) / 3.0)));
    CHECK(mafe(recs) == doctest::Approx((e1 + e2 + e3) / 3.0));
}

TEST_CASE("fit-once policy reuses the pre-test estimate") {
    Panel pan;
    pan.Y.resize(1, 8);
    pan.Y << 1, 2, 3, 4, 5, 6, 7, 8;
    int calls = 0;
    const FitFunction fit = [&](const Panel& train) {
        ++calls;
        CHECK(train.Y.cols() == 5);  // everything before the test block
        Eigen::MatrixXd B(1, 1);
        B << 1.0;
        return B;
    };
    const auto recs = rolling_forecast(pan, 1, fit, 3, RefitPolicy::none);
    CHECK(calls == 1);
    REQUIRE(recs.size() == 3);
    for (const auto& r : recs) {
        CHECK(r.ok);
        CHECK(r.error(0) == doctest::Approx(1.0));  // v - (v - 1)
    }
}

TEST_CASE("two lags consume the right regressor stacking") {
    // y_t = 1*y_{t-1} + 2*y_{t-2} exactly reproduces a known recurrence.
    Panel pan;
    pan.Y.resize(1, 7);
    pan.Y << 1, 1, 3, 5, 11, 21, 43;
    const FitFunction fit = [](const Panel&) {
        Eigen::MatrixXd B(1, 2);
        B << 1.0, 2.0;  // lag-1 block first, then lag-2
        return B;
    };
    const auto recs = rolling_forecast(pan, 2, fit, 2, RefitPolicy::per_origin);
    REQUIRE(recs.size() == 2);
    for (const auto& r : recs) {
        REQUIRE(r.ok);
        CHECK(std::abs(r.error(0)) <= 1e-12);
    }
    CHECK(rmsfe(recs) == doctest::Approx(0.0));
}

TEST_CASE("per-origin fit failures are recorded, not thrown") {
    Panel pan;
    pan.Y.resize(1, 8);
    pan.Y << 1, 2, 3, 4, 5, 6, 7, 8;
    int call = 0;
    const FitFunction fit = [&](const Panel&) {
        if (++call == 2) throw numerical_error("synthetic failure");
        Eigen::MatrixXd B(1, 1);
        B << 0.0;
        return B;
    };
    const auto recs = rolling_forecast(pan, 1, fit, 3, RefitPolicy::per_origin);
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].ok);
    CHECK_FALSE(recs[1].ok);
    CHECK(recs[1].message == "synthetic failure");
    CHECK(recs[2].ok);
    // Metrics average the successful origins only: errors 6 and 8.
    CHECK(rmsfe(recs) == doctest::Approx(std::sqrt((36.0 + 64.0) / 2.0)));
    CHECK(mafe(recs) == doctest::Approx(7.0));
}

TEST_CASE("all-failed windows give NaN metrics") {
    Panel pan;
    pan.Y.resize(1, 6);
    pan.Y << 1, 2, 3, 4, 5, 6;
    const FitFunction fit = [](const Panel&) -> Eigen::MatrixXd {
        throw numerical_error("always fails");
    };
    const auto recs = rolling_forecast(pan, 1, fit, 2, RefitPolicy::per_origin);
    REQUIRE(recs.size() == 2);
    CHECK(std::isnan(rmsfe(recs)));
    CHECK(std::isnan(mafe(recs)));
    CHECK(std::isnan(rmsfe({})));
}

TEST_CASE("a fit-once failure marks every origin failed") {
    Panel pan;
    pan.Y.resize(1, 6);
    pan.Y << 1, 2, 3, 4, 5, 6;
    const FitFunction fit = [](const Panel&) -> Eigen::MatrixXd {
        throw numerical_error("upfront failure");
    };
    const auto recs = rolling_forecast(pan, 1, fit, 2, RefitPolicy::none);
    REQUIRE(recs.size() == 2);
    for (const auto& r : recs) {
        CHECK_FALSE(r.ok);
        CHECK(r.message == "upfront failure");
    }
}

TEST_CASE("window validation") {
    Panel pan;
    pan.Y.resize(1, 6);
    pan.Y << 1, 2, 3, 4, 5, 6;
    const FitFunction fit = [](const Panel&) { return Eigen::MatrixXd::Zero(1, 1); };
    CHECK_THROWS_AS((void)rolling_forecast(pan, 1, fit, 0), std::invalid_argument);
    CHECK_THROWS_AS((void)rolling_forecast(pan, 1, fit, 6), std::invalid_argument);
    // Wrong fit output shape surfaces as a recorded failure.
    const FitFunction bad = [](const Panel&) { return Eigen::MatrixXd::Zero(2, 2); };
    const auto recs = rolling_forecast(pan, 1, bad, 2);
    for (const auto& r : recs) CHECK_FALSE(r.ok);
}
