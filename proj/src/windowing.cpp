#include "nilm/windowing.hpp"

#include <algorithm>
#include <string>

namespace nilm {

std::vector<double> padSeries(std::span<const double> series, std::size_t pad) {
    if (series.empty() && pad > 0) {
        throw DataError("pad_series: cannot edge-pad an empty series");
    }
    std::vector<double> out;
    out.reserve(series.size() + 2 * pad);
    out.insert(out.end(), pad, series.empty() ? 0.0 : series.front());
    out.insert(out.end(), series.begin(), series.end());
    out.insert(out.end(), pad, series.empty() ? 0.0 : series.back());
    return out;
}

std::vector<WindowPair> makeWindows(std::span<const double> aggregate,
                                    std::span<const double> target, Index inputLength,
                                    Index outputLength, Index step) {
    if (outputLength < 1 || inputLength < outputLength) {
        throw ConfigError("make_windows: need inputLength >= outputLength >= 1, got " +
                          std::to_string(inputLength) + "/" + std::to_string(outputLength));
    }
    if ((inputLength - outputLength) % 2 != 0) {
        throw ConfigError("make_windows: inputLength - outputLength must be even to center the "
                          "target, got " +
                          std::to_string(inputLength - outputLength));
    }
    if (step < 1) throw ConfigError("make_windows: step must be >= 1");
    if (outputLength % step != 0) {
        throw ConfigError("make_windows: step " + std::to_string(step) +
                          " must divide outputLength " + std::to_string(outputLength));
    }
    const Index m = static_cast<Index>(aggregate.size());
    if (m < outputLength) {
        throw DataError("make_windows: series of " + std::to_string(m) +
                        " samples is shorter than outputLength " + std::to_string(outputLength));
    }
    if (!target.empty() && static_cast<Index>(target.size()) != m) {
        throw ShapeError("make_windows: target length " + std::to_string(target.size()) +
                         " does not match aggregate length " + std::to_string(m));
    }

    const Index pad = (inputLength - outputLength) / 2;
    const std::vector<double> padded = padSeries(aggregate, static_cast<std::size_t>(pad));

    std::vector<Index> positions;
    for (Index pos = 0; pos + outputLength <= m; pos += step) positions.push_back(pos);
    if (positions.back() != m - outputLength) positions.push_back(m - outputLength);

    std::vector<WindowPair> pairs;
    pairs.reserve(positions.size());
    for (Index pos : positions) {
        WindowPair wp;
        wp.input = Eigen::Map<const Vec>(padded.data() + pos, inputLength);
        if (!target.empty()) {
            wp.target = Eigen::Map<const Vec>(target.data() + pos, outputLength);
        }
        wp.pos = pos;
        pairs.push_back(std::move(wp));
    }
    return pairs;
}

OverlapAccumulator::OverlapAccumulator(Index length)
    : sums_(Vec::Zero(length)), counts_(Eigen::ArrayXi::Zero(length)) {
    if (length < 1) throw ShapeError("overlap accumulator: length must be >= 1");
}

void OverlapAccumulator::add(Index pos, const Vec& prediction) {
    if (pos < 0 || pos + prediction.size() > sums_.size()) {
        throw ShapeError("overlap accumulator: window [" + std::to_string(pos) + ", " +
                         std::to_string(pos + prediction.size()) + ") exceeds series length " +
                         std::to_string(sums_.size()));
    }
    sums_.segment(pos, prediction.size()) += prediction;
    counts_.segment(pos, prediction.size()) += 1;
}

void OverlapAccumulator::merge(const OverlapAccumulator& other) {
    if (other.sums_.size() != sums_.size()) {
        throw ShapeError("overlap accumulator: cannot merge lengths " +
                         std::to_string(sums_.size()) + " and " +
                         std::to_string(other.sums_.size()));
    }
    sums_ += other.sums_;
    counts_ += other.counts_;
}

Vec OverlapAccumulator::average() const {
    for (Index i = 0; i < counts_.size(); ++i) {
        if (counts_(i) == 0) {
            throw DataError("overlap average: no prediction covers index " + std::to_string(i));
        }
    }
    return (sums_.array() / counts_.cast<double>()).matrix();
}

Vec overlapAverage(const std::vector<std::pair<Index, Vec>>& predictions, Index length) {
    OverlapAccumulator acc(length);
    for (const auto& [pos, pred] : predictions) acc.add(pos, pred);
    return acc.average();
}

std::vector<double> disaggregate(const Network& net, std::span<const double> aggregateWatts,
                                 const Divisors& divisors, Index step) {
    if (divisors.aggregate <= 0.0 || divisors.appliance <= 0.0) {
        throw ConfigError("disaggregate: divisors must be positive");
    }
    const Index m = static_cast<Index>(aggregateWatts.size());
    if (m < net.config.outputLength) {
        throw DataError("disaggregate: series of " + std::to_string(m) +
                        " samples is shorter than the output window " +
                        std::to_string(net.config.outputLength));
    }

    std::vector<double> normalized(aggregateWatts.begin(), aggregateWatts.end());
    for (double& v : normalized) v /= divisors.aggregate;

    const std::vector<WindowPair> windows =
        makeWindows(normalized, {}, net.config.inputLength, net.config.outputLength, step);

    OverlapAccumulator acc(m);
    for (const WindowPair& w : windows) {
        acc.add(w.pos, forward(net, w.input));
    }
    const Vec averaged = acc.average();

    std::vector<double> watts(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) {
        watts[static_cast<std::size_t>(i)] = std::max(0.0, averaged(i) * divisors.appliance);
    }
    return watts;
}

}  // namespace nilm
