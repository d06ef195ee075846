#pragma once

#include <span>
#include <utility>
#include <vector>

#include "nilm/network.hpp"
#include "nilm/types.hpp"

namespace nilm {

/// Replicates the edge values `pad` times on each side.
std::vector<double> padSeries(std::span<const double> series, std::size_t pad);

/// One training example: the target slice sits at the center of the input
/// window, `pos` is the index of its first sample in the unpadded series.
struct WindowPair {
    Vec input;   // inputLength, cut from the edge-padded aggregate
    Vec target;  // outputLength, cut unpadded; empty when no target was given
    Index pos;
};

/// Slides a window of `step` over the series. Positions run 0, step, 2*step,
/// ... while pos + outputLength <= m; when the last arithmetic position does
/// not reach the series end, one extra window clamped to m - outputLength is
/// emitted so every sample stays covered.
std::vector<WindowPair> makeWindows(std::span<const double> aggregate,
                                    std::span<const double> target, Index inputLength,
                                    Index outputLength, Index step);

/// Accumulates overlapping window predictions; merging is order-independent.
class OverlapAccumulator {
public:
    explicit OverlapAccumulator(Index length);

    void add(Index pos, const Vec& prediction);
    void merge(const OverlapAccumulator& other);

    /// Per-sample mean of the accumulated predictions. Throws DataError
    /// naming the first uncovered index.
    Vec average() const;

    const Vec& sums() const { return sums_; }
    const Eigen::ArrayXi& counts() const { return counts_; }

private:
    Vec sums_;
    Eigen::ArrayXi counts_;
};

Vec overlapAverage(const std::vector<std::pair<Index, Vec>>& predictions, Index length);

struct Divisors {
    double aggregate = 1000.0;  // watts
    double appliance = 1.0;     // watts
};

/// Full inference pass over one gapless aggregate trace: normalize, window,
/// run the network on every window, overlap-average, rescale to watts, and
/// clamp negatives to zero. Output length equals the input length.
std::vector<double> disaggregate(const Network& net, std::span<const double> aggregateWatts,
                                 const Divisors& divisors, Index step);

}  // namespace nilm
