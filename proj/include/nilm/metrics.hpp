#pragma once

#include <cstddef>

#include "nilm/data.hpp"

namespace nilm {

struct EvalMetrics {
    double maeWatts = 0.0;
    double onStateMaeWatts = 0.0;   // NaN when the truth has no on-state samples
    double offFalsePositiveWh = 0.0;  // predicted energy while the truth is off
    std::size_t samples = 0;          // size of the timestamp overlap
    std::size_t onSamples = 0;
};

/// Compares prediction and ground truth over their timestamp intersection.
/// A sample is on-state when the truth exceeds onThresholdWatts.
EvalMetrics evaluateSeries(const SeriesChannel& pred, const SeriesChannel& truth,
                           double onThresholdWatts, double periodSec);

}  // namespace nilm
