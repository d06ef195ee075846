#include "nilm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "nilm/rng.hpp"

namespace nilm {

void SeriesChannel::validate() const {
    if (timestamps.size() != watts.size()) {
        throw DataError("channel " + name + ": " + std::to_string(timestamps.size()) +
                        " timestamps vs " + std::to_string(watts.size()) + " watt samples");
    }
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
        if (timestamps[i] <= timestamps[i - 1]) {
            throw DataError("channel " + name + ": timestamps not strictly increasing at sample " +
                            std::to_string(i));
        }
    }
    for (std::size_t i = 0; i < watts.size(); ++i) {
        if (!(watts[i] >= 0.0)) {
            throw DataError("channel " + name + ": negative or non-finite watts at sample " +
                            std::to_string(i));
        }
    }
}

namespace {

std::string_view trimmed(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) {
        s.remove_suffix(1);
    }
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

bool parseSample(std::string_view line, char sep, std::int64_t& ts, double& watts) {
    const auto split = line.find(sep);
    if (split == std::string_view::npos) return false;
    const std::string_view a = trimmed(line.substr(0, split));
    const std::string_view b = trimmed(line.substr(split + 1));
    if (a.empty() || b.empty()) return false;
    auto ra = std::from_chars(a.data(), a.data() + a.size(), ts);
    if (ra.ec != std::errc() || ra.ptr != a.data() + a.size()) return false;
    auto rb = std::from_chars(b.data(), b.data() + b.size(), watts);
    if (rb.ec != std::errc() || rb.ptr != b.data() + b.size()) return false;
    return std::isfinite(watts);
}

SeriesChannel readSamples(const std::filesystem::path& path, char sep, bool expectHeader) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open: " + path.string());

    SeriesChannel ch;
    ch.name = path.stem().string();

    std::string line;
    std::size_t lineNo = 0;
    if (expectHeader) {
        if (!std::getline(is, line) || trimmed(line) != "timestamp,watts") {
            throw DataError(path.string() + ": expected 'timestamp,watts' header");
        }
        lineNo = 1;
    }
    while (std::getline(is, line)) {
        ++lineNo;
        if (trimmed(line).empty()) continue;
        std::int64_t ts = 0;
        double watts = 0.0;
        if (!parseSample(trimmed(line), sep, ts, watts)) {
            throw DataError(path.string() + ":" + std::to_string(lineNo) + ": malformed line '" +
                            line + "'");
        }
        if (watts < 0.0) {
            throw DataError(path.string() + ":" + std::to_string(lineNo) + ": negative watts " +
                            std::to_string(watts));
        }
        if (!ch.timestamps.empty() && ts <= ch.timestamps.back()) {
            throw DataError(path.string() + ":" + std::to_string(lineNo) +
                            ": timestamps not strictly increasing");
        }
        ch.timestamps.push_back(ts);
        ch.watts.push_back(watts);
    }
    if (ch.timestamps.empty()) throw DataError(path.string() + ": no samples");
    return ch;
}

void writeSamples(const SeriesChannel& channel, const std::filesystem::path& path,
                  const char* rowFormat, const char* header) {
    channel.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path.string());
    if (header) os << header << '\n';
    char buf[64];
    for (std::size_t i = 0; i < channel.size(); ++i) {
        const int len = std::snprintf(buf, sizeof buf, rowFormat,
                                      static_cast<long long>(channel.timestamps[i]),
                                      channel.watts[i]);
        os.write(buf, len);
    }
    if (!os) throw DataError("write failed: " + path.string());
}

}  // namespace

SeriesChannel loadChannel(const std::filesystem::path& path) {
    return readSamples(path, ' ', false);
}

void saveChannel(const SeriesChannel& channel, const std::filesystem::path& path) {
    writeSamples(channel, path, "%lld %.3f\n", nullptr);
}

SeriesChannel readSeriesCsv(const std::filesystem::path& path) {
    return readSamples(path, ',', true);
}

void writeSeriesCsv(const SeriesChannel& channel, const std::filesystem::path& path) {
    writeSamples(channel, path, "%lld,%.6f\n", "timestamp,watts");
}

SeriesChannel readSeriesAuto(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open: " + path.string());
    std::string first;
    std::getline(is, first);
    is.close();
    return trimmed(first) == "timestamp,watts" ? readSeriesCsv(path) : loadChannel(path);
}

std::vector<AlignedSegment> alignToGrid(const std::vector<SeriesChannel>& channels,
                                        const GridConfig& grid) {
    if (channels.empty()) throw DataError("align: no channels");
    if (grid.periodSec < 1) throw ConfigError("align: grid period must be >= 1 s");
    for (const SeriesChannel& ch : channels) {
        ch.validate();
        if (ch.size() == 0) throw DataError("align: channel " + ch.name + " is empty");
    }

    std::int64_t start = channels.front().timestamps.front();
    std::int64_t end = channels.front().timestamps.back();
    for (const SeriesChannel& ch : channels) {
        start = std::max(start, ch.timestamps.front());
        end = std::min(end, ch.timestamps.back());
    }
    if (start > end) throw DataError("align: channel time ranges do not intersect");

    const std::size_t n = static_cast<std::size_t>((end - start) / grid.periodSec) + 1;
    std::vector<std::vector<double>> filled(channels.size(), std::vector<double>(n));
    std::vector<bool> valid(n, true);

    for (std::size_t ci = 0; ci < channels.size(); ++ci) {
        const SeriesChannel& ch = channels[ci];
        std::size_t ptr = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::int64_t t = start + static_cast<std::int64_t>(i) * grid.periodSec;
            while (ptr + 1 < ch.size() && ch.timestamps[ptr + 1] <= t) ++ptr;
            filled[ci][i] = ch.watts[ptr];
            // forward-fill only inside inter-sample gaps of at most maxGapSec
            if (t != ch.timestamps[ptr] &&
                (ptr + 1 >= ch.size() ||
                 ch.timestamps[ptr + 1] - ch.timestamps[ptr] > grid.maxGapSec)) {
                valid[i] = false;
            }
        }
    }

    std::vector<AlignedSegment> segments;
    std::size_t runStart = 0;
    while (runStart < n) {
        if (!valid[runStart]) {
            ++runStart;
            continue;
        }
        std::size_t runEnd = runStart;
        while (runEnd < n && valid[runEnd]) ++runEnd;
        const std::size_t len = runEnd - runStart;
        if (len >= grid.minSegmentLength) {
            AlignedSegment seg;
            std::vector<std::int64_t> ts(len);
            for (std::size_t i = 0; i < len; ++i) {
                ts[i] = start + static_cast<std::int64_t>(runStart + i) * grid.periodSec;
            }
            for (std::size_t ci = 0; ci < channels.size(); ++ci) {
                SeriesChannel out;
                out.name = channels[ci].name;
                out.timestamps = ts;
                out.watts.assign(filled[ci].begin() + static_cast<std::ptrdiff_t>(runStart),
                                 filled[ci].begin() + static_cast<std::ptrdiff_t>(runEnd));
                seg.channels.push_back(std::move(out));
            }
            segments.push_back(std::move(seg));
        }
        runStart = runEnd;
    }
    return segments;
}

SeriesChannel synthesizeAggregate(const std::vector<SeriesChannel>& channels) {
    if (channels.empty()) throw DataError("aggregate: no channels");
    const SeriesChannel& first = channels.front();
    for (const SeriesChannel& ch : channels) {
        if (ch.timestamps != first.timestamps) {
            throw DataError("aggregate: channel " + ch.name + " is not on the same grid as " +
                            first.name);
        }
    }
    SeriesChannel agg;
    agg.name = "aggregate";
    agg.timestamps = first.timestamps;
    agg.watts.assign(first.size(), 0.0);
    for (const SeriesChannel& ch : channels) {
        for (std::size_t i = 0; i < agg.watts.size(); ++i) agg.watts[i] += ch.watts[i];
    }
    return agg;
}

std::vector<double> normalize(std::span<const double> series, double divisor) {
    if (!(divisor > 0.0)) throw ConfigError("normalize: divisor must be positive");
    std::vector<double> out(series.begin(), series.end());
    for (double& v : out) v /= divisor;
    return out;
}

std::vector<double> denormalize(std::span<const double> series, double divisor) {
    if (!(divisor > 0.0)) throw ConfigError("denormalize: divisor must be positive");
    std::vector<double> out(series.begin(), series.end());
    for (double& v : out) v *= divisor;
    return out;
}

const ApplianceSpec* findBuiltinAppliance(std::string_view name) {
    static const ApplianceSpec specs[] = {
        {"fridge", 500.0, 50.0},
        {"lighting", 200.0, 20.0},
        {"dishwasher", 1400.0, 10.0},
    };
    for (const ApplianceSpec& s : specs) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

std::vector<WindowPair> rebalanceOnState(const std::vector<WindowPair>& pairs, double pTarget,
                                         const ApplianceSpec& spec, std::uint64_t seed) {
    if (!(pTarget > 0.0 && pTarget < 1.0)) {
        throw ConfigError("rebalance: target proportion must lie in (0, 1)");
    }
    std::vector<bool> isOn(pairs.size());
    std::size_t nOn = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].target.size() == 0) {
            throw DataError("rebalance: window pair without a target");
        }
        isOn[i] = pairs[i].target.maxCoeff() * spec.divisor > spec.onThreshold;
        nOn += isOn[i] ? 1 : 0;
    }
    if (nOn == 0) throw DataError("rebalance: no on-state pairs; nothing to balance toward");

    const std::size_t nOff = pairs.size() - nOn;
    if (nOff == 0) return pairs;

    const double keepProb = std::min(
        1.0, static_cast<double>(nOn) * (1.0 - pTarget) / (pTarget * static_cast<double>(nOff)));

    std::mt19937_64 rng(seed);
    std::vector<WindowPair> kept;
    kept.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (isOn[i] || uniform01(rng) < keepProb) kept.push_back(pairs[i]);
    }
    return kept;
}

namespace {

std::mt19937_64 channelRng(std::uint64_t seed, std::uint64_t lane) {
    return std::mt19937_64(seed * 0x9E3779B97F4A7C15ULL + lane);
}

std::vector<double> synthFridge(std::mt19937_64 rng, std::size_t n, double period) {
    const double onMean = 15.0 * 60.0;
    const double offMean = 30.0 * 60.0;
    auto duration = [&rng](double mean) { return mean * uniformIn(rng, 0.8, 1.2); };

    bool on = uniform01(rng) < onMean / (onMean + offMean);
    double remaining = uniform01(rng) * duration(on ? onMean : offMean);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (remaining <= 0.0) {
            on = !on;
            remaining = duration(on ? onMean : offMean);
        }
        w[i] = on ? 160.0 + uniformIn(rng, -10.0, 10.0) : 0.0;
        remaining -= period;
    }
    return w;
}

std::vector<double> synthLighting(std::mt19937_64 rng, std::size_t n, double period) {
    static const double levels[] = {0.0, 40.0, 80.0, 120.0};
    double level = levels[rng() % 4];
    double remaining = uniformIn(rng, 10.0, 120.0) * 60.0;
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (remaining <= 0.0) {
            level = levels[rng() % 4];
            remaining = uniformIn(rng, 10.0, 120.0) * 60.0;
        }
        w[i] = level;
        remaining -= period;
    }
    return w;
}

std::vector<double> synthDishwasher(std::mt19937_64 rng, std::size_t n, double period) {
    const double meanGap = 2.0 * 86400.0;
    const double eventLen = 40.0 * 60.0;  // 10 min at 200 W, 20 min at 1200 W, 10 min at 200 W
    std::vector<double> w(n, 0.0);
    const double total = static_cast<double>(n) * period;
    double t = exponential(rng, meanGap);
    while (t < total) {
        for (std::size_t i = static_cast<std::size_t>(std::ceil(t / period));
             i < n && static_cast<double>(i) * period < t + eventLen; ++i) {
            const double offset = static_cast<double>(i) * period - t;
            w[i] = (offset < 600.0 || offset >= 1800.0) ? 200.0 : 1200.0;
        }
        t += std::max(eventLen, exponential(rng, meanGap));
    }
    return w;
}

}  // namespace

Household synthHousehold(const SynthConfig& cfg) {
    if (cfg.durationDays <= 0.0) throw ConfigError("synth: duration must be positive");
    if (cfg.periodSec < 1) throw ConfigError("synth: period must be >= 1 s");
    if (cfg.noiseSigma < 0.0) throw ConfigError("synth: noise sigma must be nonnegative");

    const std::size_t n =
        static_cast<std::size_t>(std::llround(cfg.durationDays * 86400.0 / cfg.periodSec));
    if (n == 0) throw ConfigError("synth: duration too short for the sample period");
    const double period = static_cast<double>(cfg.periodSec);

    std::vector<std::int64_t> ts(n);
    for (std::size_t i = 0; i < n; ++i) {
        ts[i] = cfg.startTime + static_cast<std::int64_t>(i) * cfg.periodSec;
    }

    Household h;
    h.appliances.push_back({"fridge", ts, synthFridge(channelRng(cfg.seed, 0), n, period)});
    h.appliances.push_back({"lighting", ts, synthLighting(channelRng(cfg.seed, 1), n, period)});
    h.appliances.push_back({"dishwasher", ts, synthDishwasher(channelRng(cfg.seed, 2), n, period)});

    h.aggregate = synthesizeAggregate(h.appliances);
    std::mt19937_64 noiseRng = channelRng(cfg.seed, 3);
    for (double& v : h.aggregate.watts) {
        v = std::max(0.0, v + cfg.noiseSigma * gaussian(noiseRng));
    }
    return h;
}

}  // namespace nilm
