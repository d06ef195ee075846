#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nilm/types.hpp"
#include "nilm/windowing.hpp"

namespace nilm {

/// One timestamped power trace. Timestamps are seconds since the epoch,
/// strictly increasing; watts are nonnegative.
struct SeriesChannel {
    std::string name;
    std::vector<std::int64_t> timestamps;
    std::vector<double> watts;

    std::size_t size() const { return timestamps.size(); }
    void validate() const;  // throws DataError on any invariant violation
};

/// Parses a channel file of "unix_timestamp watts" lines. Malformed lines,
/// negative watts, and non-increasing timestamps are reported with their
/// line number. The channel name is the file stem.
SeriesChannel loadChannel(const std::filesystem::path& path);
void saveChannel(const SeriesChannel& channel, const std::filesystem::path& path);

/// CSV with the header "timestamp,watts".
SeriesChannel readSeriesCsv(const std::filesystem::path& path);
void writeSeriesCsv(const SeriesChannel& channel, const std::filesystem::path& path);

/// Reads either format, deciding by the first line.
SeriesChannel readSeriesAuto(const std::filesystem::path& path);

struct GridConfig {
    std::int64_t periodSec = 3;
    std::int64_t maxGapSec = 60;     // forward-fill gaps up to this; split at larger ones
    std::size_t minSegmentLength = 1;
};

/// Resamples all channels onto the shared uniform grid covering the
/// intersection of their time ranges. Gaps within maxGapSec are
/// forward-filled; a larger gap in any channel splits the grid, and only
/// segments of at least minSegmentLength samples survive.
struct AlignedSegment {
    std::vector<SeriesChannel> channels;  // identical timestamps across entries

    std::size_t length() const { return channels.empty() ? 0 : channels.front().size(); }
};

std::vector<AlignedSegment> alignToGrid(const std::vector<SeriesChannel>& channels,
                                        const GridConfig& grid);

/// Pointwise sum of channels that share one grid.
SeriesChannel synthesizeAggregate(const std::vector<SeriesChannel>& channels);

std::vector<double> normalize(std::span<const double> series, double divisor);
std::vector<double> denormalize(std::span<const double> series, double divisor);

/// Per-appliance normalization divisor and on-state detection threshold.
struct ApplianceSpec {
    std::string name;
    double divisor;      // watts
    double onThreshold;  // watts
};

/// Specs for the three stock appliance types (fridge, lighting, dishwasher);
/// nullptr for anything else.
const ApplianceSpec* findBuiltinAppliance(std::string_view name);

/// Keeps every on-state pair (max of the rescaled target above the
/// threshold) and thins the off-state pairs so the expected on proportion
/// becomes pTarget. Throws DataError when there is nothing to keep.
std::vector<WindowPair> rebalanceOnState(const std::vector<WindowPair>& pairs, double pTarget,
                                         const ApplianceSpec& spec, std::uint64_t seed);

struct SynthConfig {
    std::uint64_t seed = 1;
    double durationDays = 14.0;
    std::int64_t startTime = 1300000000;
    std::int64_t periodSec = 3;
    double noiseSigma = 2.0;  // watts of sensor noise on the aggregate
};

struct Household {
    std::vector<SeriesChannel> appliances;  // fridge, lighting, dishwasher
    SeriesChannel aggregate;                // sum plus sensor noise, clamped at zero
};

/// Deterministic synthetic household: a duty-cycled fridge, piecewise
/// constant lighting, and sparse three-phase dishwasher runs.
Household synthHousehold(const SynthConfig& cfg);

}  // namespace nilm
