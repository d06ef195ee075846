#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "nilm/metrics.hpp"
#include "oracles.hpp"

using namespace nilm;

namespace {

SeriesChannel series(std::initializer_list<double> watts, std::int64_t start = 0) {
    SeriesChannel ch;
    ch.name = "s";
    std::int64_t t = start;
    for (double w : watts) {
        ch.timestamps.push_back(t);
        ch.watts.push_back(w);
        t += 3;
    }
    return ch;
}

}  // namespace

TEST_CASE("identical series score zero error") {
    const SeriesChannel truth = series({10, 20, 30, 40});
    const EvalMetrics m = evaluateSeries(truth, truth, 50.0, 3.0);
    CHECK(m.maeWatts == 0.0);
    CHECK(m.samples == 4);
}

TEST_CASE("a constant offset shows up directly") {
    const SeriesChannel truth = series({10, 20, 30, 40});
    SeriesChannel pred = truth;
    for (double& w : pred.watts) w += 10.0;
    CHECK(evaluateSeries(pred, truth, 50.0, 3.0).maeWatts == doctest::Approx(10.0));
}

TEST_CASE("hand-built five sample case matches direct summation") {
    const SeriesChannel truth = series({0, 100, 60, 0, 20});
    const SeriesChannel pred = series({5, 90, 70, 10, 20});

    double direct = 0.0;
    for (std::size_t i = 0; i < 5; ++i) direct += std::abs(pred.watts[i] - truth.watts[i]);
    direct /= 5.0;

    const EvalMetrics m = evaluateSeries(pred, truth, 50.0, 3.0);
    CHECK(m.maeWatts == doctest::Approx(direct).epsilon(1e-12));

    // on-state = truth above 50 W: samples 1 and 2
    CHECK(m.onSamples == 2);
    CHECK(m.onStateMaeWatts == doctest::Approx((10.0 + 10.0) / 2.0));
    // off-state predicted energy: (5 + 10 + 20) W * 3 s
    CHECK(m.offFalsePositiveWh == doctest::Approx(35.0 * 3.0 / 3600.0));
}

TEST_CASE("only the timestamp overlap is scored") {
    const SeriesChannel truth = series({10, 20, 30, 40}, 0);
    const SeriesChannel pred = series({99, 30, 40, 99}, -6);  // overlaps at t = 0, 3
    const EvalMetrics m = evaluateSeries(pred, truth, 50.0, 3.0);
    CHECK(m.samples == 2);
    CHECK(m.maeWatts == doctest::Approx((std::abs(40.0 - 10.0) + std::abs(99.0 - 20.0)) / 2.0));
}

TEST_CASE("disjoint series cannot be compared") {
    const SeriesChannel truth = series({10, 20}, 0);
    const SeriesChannel pred = series({10, 20}, 1000);
    CHECK_THROWS_AS(evaluateSeries(pred, truth, 50.0, 3.0), DataError);
}

TEST_CASE("no on-state samples yields a NaN on-state error") {
    const SeriesChannel truth = series({1, 2, 3});
    const SeriesChannel pred = series({2, 3, 4});
    const EvalMetrics m = evaluateSeries(pred, truth, 50.0, 3.0);
    CHECK(std::isnan(m.onStateMaeWatts));
    CHECK(m.onSamples == 0);
}
