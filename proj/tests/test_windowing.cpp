#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>
#include <vector>

#include "doctest.h"
#include "nilm/windowing.hpp"
#include "oracles.hpp"

using namespace nilm;

namespace {

// exhaustive position enumeration, independent of makeWindows
std::vector<Index> enumeratePositions(Index m, Index outLen, Index step) {
    std::vector<Index> pos;
    for (Index p = 0; p + outLen <= m; p += step) pos.push_back(p);
    return pos;
}

std::vector<double> rampSeries(std::size_t n) {
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<double>(i);
    return s;
}

Network zeroNet(Index lIn, Index lOut, double outputBias) {
    NetworkConfig cfg;
    cfg.inputLength = lIn;
    cfg.outputLength = lOut;
    cfg.gluStages = 3;
    cfg.convChannels = 4;
    cfg.kernelSize = 4;
    cfg.resBlocks = 1;
    cfg.resHidden = 5;
    Network net = buildNetwork(cfg);
    setZero(net.params);
    net.params.output.bias.setConstant(outputBias);
    return net;
}

}  // namespace

TEST_CASE("pad_series replicates the edges") {
    const std::vector<double> in{5, 7};
    const std::vector<double> out = padSeries(in, 2);
    CHECK(out == std::vector<double>{5, 5, 5, 7, 7, 7});

    CHECK(padSeries(in, 0) == in);
    CHECK(padSeries(rampSeries(10), 3).size() == 16);
    CHECK_THROWS_AS(padSeries({}, 1), DataError);
}

TEST_CASE("window count on the default geometry") {
    const auto series = rampSeries(1000);
    const auto pairs = makeWindows(series, series, 800, 100, 5);
    const auto expected = enumeratePositions(1000, 100, 5);
    REQUIRE(pairs.size() == expected.size());
    CHECK(pairs.size() == 181);  // floor((m - l_out)/step) + 1
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(pairs[i].pos == expected[i]);
        CHECK(pairs[i].input.size() == 800);
        CHECK(pairs[i].target.size() == 100);
    }
    CHECK(pairs.back().pos == 900);
}

TEST_CASE("a series exactly one output long yields a single window") {
    const auto series = rampSeries(100);
    const auto pairs = makeWindows(series, series, 800, 100, 5);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].pos == 0);
}

TEST_CASE("a misaligned tail gets one clamped window") {
    const auto series = rampSeries(1003);
    const auto pairs = makeWindows(series, series, 800, 100, 5);
    const auto arithmetic = enumeratePositions(1003, 100, 5);
    CHECK(pairs.size() == arithmetic.size() + 1);
    CHECK(pairs.back().pos == 903);  // covers the final samples

    // positions are arithmetic with difference step except the clamp
    for (std::size_t i = 1; i + 1 < pairs.size(); ++i) {
        CHECK(pairs[i].pos - pairs[i - 1].pos == 5);
    }
}

TEST_CASE("the target slice sits at the center of the input window") {
    std::mt19937_64 rng(80);
    const Vec noise = oracles::randomVec(400, rng);
    std::vector<double> series(noise.data(), noise.data() + noise.size());
    const Index lIn = 32, lOut = 8, pad = (lIn - lOut) / 2;
    const auto pairs = makeWindows(series, series, lIn, lOut, 4);
    for (const WindowPair& wp : pairs) {
        for (Index j = 0; j < lOut; ++j) {
            CHECK(wp.input(pad + j) == series[static_cast<std::size_t>(wp.pos + j)]);
            CHECK(wp.target(j) == series[static_cast<std::size_t>(wp.pos + j)]);
        }
    }
}

TEST_CASE("window generation validates its arguments") {
    const auto series = rampSeries(500);
    CHECK_THROWS_AS(makeWindows(series, series, 800, 100, 3), ConfigError);   // 3 does not divide 100
    CHECK_THROWS_AS(makeWindows(series, series, 801, 100, 5), ConfigError);   // off-center
    CHECK_THROWS_AS(makeWindows(rampSeries(99), {}, 800, 100, 5), DataError); // too short
    CHECK_THROWS_AS(makeWindows(series, rampSeries(400), 800, 100, 5), ShapeError);
}

TEST_CASE("overlap average of two hand-placed windows") {
    std::vector<std::pair<Index, Vec>> preds;
    preds.emplace_back(0, Vec::Constant(4, 1.0));
    preds.emplace_back(2, Vec::Constant(4, 3.0));
    const Vec out = overlapAverage(preds, 6);
    Vec expected(6);
    expected << 1, 1, 2, 2, 3, 3;
    CHECK(out == expected);
}

TEST_CASE("overlap average of identical constants is that constant") {
    OverlapAccumulator acc(20);
    for (Index pos = 0; pos + 4 <= 20; pos += 2) acc.add(pos, Vec::Constant(4, 2.5));
    CHECK(acc.average().isApproxToConstant(2.5));
}

TEST_CASE("interior samples receive outputLength/step predictions") {
    const Index m = 1500;
    const auto pairs = makeWindows(rampSeries(static_cast<std::size_t>(m)), {}, 800, 100, 5);
    OverlapAccumulator acc(m);
    for (const WindowPair& wp : pairs) acc.add(wp.pos, Vec::Zero(100));
    for (Index i = 0; i < m; ++i) {
        CHECK(acc.counts()(i) >= 1);
        if (i >= 100 && i <= m - 1 - 100) CHECK(acc.counts()(i) == 20);
    }
}

TEST_CASE("an uncovered index is reported by name") {
    OverlapAccumulator acc(10);
    acc.add(0, Vec::Constant(4, 1.0));
    CHECK_THROWS_WITH_AS(acc.average(), doctest::Contains("index 4"), DataError);
}

TEST_CASE("merging accumulators matches a single pass") {
    std::mt19937_64 rng(81);
    const auto pairs = makeWindows(rampSeries(300), {}, 64, 8, 4);
    OverlapAccumulator whole(300), left(300), right(300);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const Vec pred = oracles::randomVec(8, rng);
        whole.add(pairs[i].pos, pred);
        (i % 2 == 0 ? left : right).add(pairs[i].pos, pred);
    }
    left.merge(right);
    CHECK(left.sums() == whole.sums());
    CHECK((left.counts() == whole.counts()).all());
}

TEST_CASE("windows sliced from the truth reconstruct the truth") {
    // integer-valued watts keep the sums exact
    std::mt19937_64 rng(82);
    std::vector<double> truth(300);
    for (double& v : truth) v = static_cast<double>(rng() % 2000);
    const auto pairs = makeWindows(truth, truth, 64, 8, 2);

    OverlapAccumulator acc(300);
    for (const WindowPair& wp : pairs) acc.add(wp.pos, wp.target);
    const Vec rebuilt = acc.average();
    for (Index i = 0; i < 300; ++i) CHECK(rebuilt(i) == truth[static_cast<std::size_t>(i)]);

    // and with arbitrary reals it holds to rounding
    std::vector<double> real(300);
    for (double& v : real) v = uniformIn(rng, 0.0, 3.0);
    const auto realPairs = makeWindows(real, real, 64, 8, 2);
    OverlapAccumulator racc(300);
    for (const WindowPair& wp : realPairs) racc.add(wp.pos, wp.target);
    const Vec rrebuilt = racc.average();
    for (Index i = 0; i < 300; ++i) {
        CHECK(rrebuilt(i) == doctest::Approx(real[static_cast<std::size_t>(i)]).epsilon(1e-12));
    }
}

TEST_CASE("disaggregate output is zero for a zero network and zero input") {
    const Network net = zeroNet(64, 8, 0.0);
    const std::vector<double> aggregate(100, 0.0);
    const auto watts = disaggregate(net, aggregate, Divisors{1000.0, 500.0}, 4);
    REQUIRE(watts.size() == 100);
    for (double w : watts) CHECK(w == 0.0);
}

TEST_CASE("disaggregate output length always matches the input") {
    const Network net = zeroNet(64, 8, 0.1);
    for (std::size_t m : {8u, 65u, 100u, 257u}) {
        CHECK(disaggregate(net, rampSeries(m), Divisors{1000.0, 500.0}, 4).size() == m);
    }
    CHECK_THROWS_AS(disaggregate(net, rampSeries(7), Divisors{1000.0, 500.0}, 4), DataError);
}

TEST_CASE("negative predictions are clamped to zero watts") {
    const Network net = zeroNet(64, 8, -0.1);
    const auto watts = disaggregate(net, rampSeries(100), Divisors{1000.0, 500.0}, 4);
    for (double w : watts) CHECK(w == 0.0);
}
