#include "nilm/metrics.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

namespace nilm {

EvalMetrics evaluateSeries(const SeriesChannel& pred, const SeriesChannel& truth,
                           double onThresholdWatts, double periodSec) {
    pred.validate();
    truth.validate();
    if (periodSec <= 0.0) throw ConfigError("evaluate: period must be positive");

    std::unordered_map<std::int64_t, std::size_t> truthIndex;
    truthIndex.reserve(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) truthIndex.emplace(truth.timestamps[i], i);

    EvalMetrics m;
    double absSum = 0.0;
    double onAbsSum = 0.0;
    double offPredSum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const auto hit = truthIndex.find(pred.timestamps[i]);
        if (hit == truthIndex.end()) continue;
        const double p = pred.watts[i];
        const double t = truth.watts[hit->second];
        m.samples += 1;
        absSum += std::abs(p - t);
        if (t > onThresholdWatts) {
            m.onSamples += 1;
            onAbsSum += std::abs(p - t);
        } else {
            offPredSum += p;
        }
    }
    if (m.samples == 0) {
        throw DataError("evaluate: prediction and truth share no timestamps");
    }
    m.maeWatts = absSum / static_cast<double>(m.samples);
    m.onStateMaeWatts = m.onSamples > 0 ? onAbsSum / static_cast<double>(m.onSamples)
                                        : std::numeric_limits<double>::quiet_NaN();
    m.offFalsePositiveWh = offPredSum * periodSec / 3600.0;
    return m;
}

}  // namespace nilm
