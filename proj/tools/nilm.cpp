// Command-line front end: synthesize data, train, disaggregate, evaluate,
// and gradient-check, driven by a flat key=value config file with
// --key value overrides.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nilm/checkpoint.hpp"
#include "nilm/data.hpp"
#include "nilm/metrics.hpp"
#include "nilm/network.hpp"
#include "nilm/rng.hpp"
#include "nilm/training.hpp"
#include "nilm/windowing.hpp"

namespace fs = std::filesystem;
using namespace nilm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitCheckFailed = 4;

const std::set<std::string>& knownKeys() {
    static const std::set<std::string> keys = {
        // output & seeding
        "out_dir", "seed",
        // network geometry
        "l_in", "l_out", "glu_stages", "conv_channels", "kernel_size", "res_blocks", "res_hidden",
        // windowing
        "step",
        // training
        "batch_size", "learning_rate", "beta1", "beta2", "epsilon", "epochs", "val_fraction",
        "rebalance_target",
        // appliance & normalization
        "appliance", "appliance_divisor", "aggregate_divisor", "on_threshold",
        // grid alignment
        "grid_period", "max_gap",
        // synthesis
        "duration_days", "noise_sigma", "start_time",
        // inputs
        "aggregate", "channels", "target", "checkpoint", "pred", "truth",
        // gradient check
        "h", "min_coords",
    };
    return keys;
}

std::string formatDouble(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// Flat key=value configuration: file values first, flag overrides on top.
// Every typed read records the effective value so the run can be replayed
// from the resolved file this class writes.
class RunConfig {
public:
    void setFromFile(const fs::path& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("config: cannot open " + path.string());
        std::string line;
        std::size_t lineNo = 0;
        while (std::getline(is, line)) {
            ++lineNo;
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos || eq == 0) {
                throw ConfigError("config: " + path.string() + ":" + std::to_string(lineNo) +
                                  ": expected key=value, got '" + line + "'");
            }
            set(line.substr(0, eq), line.substr(eq + 1));
        }
    }

    void set(const std::string& key, const std::string& value) {
        if (!knownKeys().count(key)) throw ConfigError("config: unknown key '" + key + "'");
        values_[key] = value;
    }

    std::optional<std::string> maybe(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }

    std::string str(const std::string& key, const std::string& fallback) {
        const auto v = maybe(key);
        const std::string out = v ? *v : fallback;
        resolved_[key] = out;
        return out;
    }

    std::string require(const std::string& key) {
        const auto v = maybe(key);
        if (!v) throw ConfigError("config: missing required key '" + key + "'");
        resolved_[key] = *v;
        return *v;
    }

    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        const auto v = maybe(key);
        if (!v) {
            resolved_[key] = std::to_string(fallback);
            return fallback;
        }
        std::int64_t out = 0;
        const auto r = std::from_chars(v->data(), v->data() + v->size(), out);
        if (r.ec != std::errc() || r.ptr != v->data() + v->size()) {
            throw ConfigError("config: key '" + key + "' expects an integer, got '" + *v + "'");
        }
        resolved_[key] = *v;
        return out;
    }

    double real(const std::string& key, double fallback) {
        const auto v = maybe(key);
        if (!v) {
            resolved_[key] = formatDouble(fallback);
            return fallback;
        }
        double out = 0.0;
        const auto r = std::from_chars(v->data(), v->data() + v->size(), out);
        if (r.ec != std::errc() || r.ptr != v->data() + v->size()) {
            throw ConfigError("config: key '" + key + "' expects a number, got '" + *v + "'");
        }
        resolved_[key] = *v;
        return out;
    }

    void writeResolved(const fs::path& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw DataError("cannot write resolved config: " + path.string());
        for (const auto& [key, value] : resolved_) os << key << '=' << value << '\n';
    }

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, std::string> resolved_;
};

Index integerIndex(RunConfig& c, const std::string& key, Index fallback) {
    return static_cast<Index>(c.integer(key, static_cast<std::int64_t>(fallback)));
}

NetworkConfig networkConfigFrom(RunConfig& c, const NetworkConfig& defaults) {
    NetworkConfig cfg;
    cfg.inputLength = integerIndex(c, "l_in", defaults.inputLength);
    cfg.outputLength = integerIndex(c, "l_out", defaults.outputLength);
    cfg.gluStages = static_cast<int>(c.integer("glu_stages", defaults.gluStages));
    cfg.convChannels = integerIndex(c, "conv_channels", defaults.convChannels);
    cfg.kernelSize = integerIndex(c, "kernel_size", defaults.kernelSize);
    cfg.resBlocks = static_cast<int>(c.integer("res_blocks", defaults.resBlocks));
    cfg.resHidden = integerIndex(c, "res_hidden", defaults.resHidden);
    cfg.seed = static_cast<std::uint64_t>(c.integer("seed", static_cast<std::int64_t>(defaults.seed)));
    cfg.validate();
    return cfg;
}

TrainConfig trainConfigFrom(RunConfig& c, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.batchSize = static_cast<int>(c.integer("batch_size", 32));
    cfg.adam.learningRate = c.real("learning_rate", 1e-3);
    cfg.adam.beta1 = c.real("beta1", 0.9);
    cfg.adam.beta2 = c.real("beta2", 0.999);
    cfg.adam.epsilon = c.real("epsilon", 1e-8);
    cfg.epochs = static_cast<int>(c.integer("epochs", 10));
    cfg.valFraction = c.real("val_fraction", 0.1);
    cfg.shuffleSeed = seed;
    cfg.validate();
    return cfg;
}

ApplianceSpec applianceFrom(RunConfig& c) {
    ApplianceSpec spec;
    spec.name = c.str("appliance", "fridge");
    const ApplianceSpec* builtin = findBuiltinAppliance(spec.name);
    if (builtin) {
        spec.divisor = c.real("appliance_divisor", builtin->divisor);
        spec.onThreshold = c.real("on_threshold", builtin->onThreshold);
    } else {
        if (!c.maybe("appliance_divisor") || !c.maybe("on_threshold")) {
            throw ConfigError("config: appliance '" + spec.name +
                              "' is not builtin; set appliance_divisor and on_threshold");
        }
        spec.divisor = c.real("appliance_divisor", 0.0);
        spec.onThreshold = c.real("on_threshold", 0.0);
    }
    if (spec.divisor <= 0.0) throw ConfigError("config: appliance_divisor must be positive");
    if (spec.onThreshold < 0.0) throw ConfigError("config: on_threshold must be nonnegative");
    return spec;
}

fs::path outDirFrom(RunConfig& c) {
    const fs::path dir = c.require("out_dir");
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> splitList(const std::string& joined, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(joined);
    while (std::getline(is, item, sep)) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string canonicalOr(const std::string& path) {
    std::error_code ec;
    const fs::path c = fs::weakly_canonical(fs::path(path), ec);
    return ec ? path : c.string();
}

void writeHistoryCsv(const std::vector<EpochStats>& history, const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write history: " + path.string());
    os << "epoch,train_mae,val_mae\n";
    for (const EpochStats& e : history) {
        os << e.epoch << ',' << formatDouble(e.trainMae) << ',' << formatDouble(e.valMae) << '\n';
    }
}

int cmdSynth(RunConfig& c) {
    const fs::path outDir = outDirFrom(c);
    SynthConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(c.integer("seed", 1));
    cfg.durationDays = c.real("duration_days", 14.0);
    cfg.startTime = c.integer("start_time", 1300000000);
    cfg.periodSec = c.integer("grid_period", 3);
    cfg.noiseSigma = c.real("noise_sigma", 2.0);

    const Household h = synthHousehold(cfg);
    for (const SeriesChannel& ch : h.appliances) {
        saveChannel(ch, outDir / (ch.name + ".dat"));
    }
    saveChannel(h.aggregate, outDir / "aggregate.dat");
    c.writeResolved(outDir / "synth.resolved.cfg");

    std::cout << "wrote " << h.appliances.size() + 1 << " channels of "
              << h.aggregate.size() << " samples to " << outDir.string() << '\n';
    return kExitOk;
}

struct PreparedData {
    std::vector<WindowPair> pairs;
    std::vector<std::string> sources;  // canonical input paths
};

PreparedData prepareTrainingData(RunConfig& c, const NetworkConfig& netCfg, Index step,
                                 const ApplianceSpec& spec, double aggregateDivisor) {
    const auto aggregatePath = c.maybe("aggregate");
    const auto channelsJoined = c.maybe("channels");
    if (!aggregatePath && !channelsJoined) {
        throw ConfigError("config: training needs 'aggregate' or 'channels'");
    }
    if (aggregatePath && channelsJoined) {
        throw ConfigError("config: give either 'aggregate' or 'channels', not both");
    }
    const std::string targetPath = c.require("target");
    if (aggregatePath) c.str("aggregate", "");
    if (channelsJoined) c.str("channels", "");

    PreparedData prep;
    std::vector<SeriesChannel> toAlign;
    std::size_t aggregateCount = 0;  // leading entries of toAlign summed into the aggregate

    if (aggregatePath) {
        toAlign.push_back(loadChannel(*aggregatePath));
        aggregateCount = 1;
        prep.sources.push_back(canonicalOr(*aggregatePath));
    } else {
        for (const std::string& p : splitList(*channelsJoined, ',')) {
            toAlign.push_back(loadChannel(p));
            prep.sources.push_back(canonicalOr(p));
        }
        aggregateCount = toAlign.size();
        if (aggregateCount == 0) throw ConfigError("config: 'channels' is empty");
    }
    toAlign.push_back(loadChannel(targetPath));

    GridConfig grid;
    grid.periodSec = c.integer("grid_period", 3);
    grid.maxGapSec = c.integer("max_gap", 60);
    grid.minSegmentLength = static_cast<std::size_t>(netCfg.inputLength);

    const std::vector<AlignedSegment> segments = alignToGrid(toAlign, grid);
    if (segments.empty()) {
        throw DataError("training data: no aligned segment reaches " +
                        std::to_string(netCfg.inputLength) + " samples");
    }

    for (const AlignedSegment& seg : segments) {
        std::vector<double> aggregateWatts;
        if (aggregateCount == 1) {
            aggregateWatts = seg.channels[0].watts;
        } else {
            std::vector<SeriesChannel> parts(seg.channels.begin(),
                                             seg.channels.begin() + aggregateCount);
            aggregateWatts = synthesizeAggregate(parts).watts;
        }
        const std::vector<double> aggregateNorm = normalize(aggregateWatts, aggregateDivisor);
        const std::vector<double> targetNorm = normalize(seg.channels.back().watts, spec.divisor);
        std::vector<WindowPair> pairs =
            makeWindows(aggregateNorm, targetNorm, netCfg.inputLength, netCfg.outputLength, step);
        prep.pairs.insert(prep.pairs.end(), std::make_move_iterator(pairs.begin()),
                          std::make_move_iterator(pairs.end()));
    }
    return prep;
}

int cmdTrain(RunConfig& c) {
    const fs::path outDir = outDirFrom(c);
    const NetworkConfig netCfg = networkConfigFrom(c, NetworkConfig{});
    const TrainConfig trainCfg = trainConfigFrom(c, netCfg.seed);
    const Index step = static_cast<Index>(c.integer("step", 5));
    const ApplianceSpec spec = applianceFrom(c);
    const double aggregateDivisor = c.real("aggregate_divisor", 1000.0);
    const double rebalanceTarget = c.real("rebalance_target", 0.0);

    PreparedData prep = prepareTrainingData(c, netCfg, step, spec, aggregateDivisor);
    std::cerr << "training pool: " << prep.pairs.size() << " window pairs\n";

    if (rebalanceTarget > 0.0) {
        prep.pairs = rebalanceOnState(prep.pairs, rebalanceTarget, spec, netCfg.seed);
        std::cerr << "after rebalancing: " << prep.pairs.size() << " window pairs\n";
    }

    Network net = buildNetwork(netCfg);
    const TrainResult result = train(net, prep.pairs, trainCfg, [&](const EpochStats& e) {
        std::cerr << "epoch " << e.epoch << '/' << trainCfg.epochs << ": train " << e.trainMae
                  << " val " << e.valMae << '\n';
    });

    CheckpointMeta meta;
    meta.appliance = spec.name;
    meta.aggregateDivisor = aggregateDivisor;
    meta.applianceDivisor = spec.divisor;
    std::string joined;
    for (const std::string& s : prep.sources) {
        if (!joined.empty()) joined += ';';
        joined += s;
    }
    meta.trainSource = joined;

    const fs::path ckptPath = outDir / (spec.name + ".ckpt");
    saveCheckpoint(net, meta, ckptPath);
    writeHistoryCsv(result.history, outDir / "history.csv");
    c.writeResolved(outDir / "train.resolved.cfg");

    std::cout << "checkpoint " << ckptPath.string() << " (best epoch " << result.bestEpoch << ")\n";
    return kExitOk;
}

int cmdDisaggregate(RunConfig& c) {
    const fs::path outDir = outDirFrom(c);
    const LoadedCheckpoint loaded = loadCheckpoint(c.require("checkpoint"));
    if (const auto requested = c.maybe("appliance")) {
        c.str("appliance", "");
        if (*requested != loaded.meta.appliance) {
            throw ConfigError("config: appliance '" + *requested + "' does not match checkpoint '" +
                              loaded.meta.appliance + "'");
        }
    }

    const std::string aggregatePath = c.require("aggregate");
    const std::string canonical = canonicalOr(aggregatePath);
    for (const std::string& trainInput : splitList(loaded.meta.trainSource, ';')) {
        if (trainInput == canonical) {
            throw DataError("refusing to disaggregate a training input: " + canonical);
        }
    }

    const SeriesChannel aggregate = loadChannel(aggregatePath);
    GridConfig grid;
    grid.periodSec = c.integer("grid_period", 3);
    grid.maxGapSec = c.integer("max_gap", 60);
    grid.minSegmentLength = static_cast<std::size_t>(loaded.net.config.inputLength);
    const Index step = static_cast<Index>(c.integer("step", 5));

    const std::vector<AlignedSegment> segments = alignToGrid({aggregate}, grid);
    if (segments.empty()) {
        throw DataError("aggregate: no aligned segment reaches " +
                        std::to_string(loaded.net.config.inputLength) + " samples");
    }

    const Divisors divisors{loaded.meta.aggregateDivisor, loaded.meta.applianceDivisor};
    SeriesChannel out;
    out.name = loaded.meta.appliance;
    for (const AlignedSegment& seg : segments) {
        const std::vector<double> watts =
            disaggregate(loaded.net, seg.channels[0].watts, divisors, step);
        out.timestamps.insert(out.timestamps.end(), seg.channels[0].timestamps.begin(),
                              seg.channels[0].timestamps.end());
        out.watts.insert(out.watts.end(), watts.begin(), watts.end());
    }

    const fs::path predPath = outDir / "pred.csv";
    writeSeriesCsv(out, predPath);
    c.writeResolved(outDir / "disaggregate.resolved.cfg");
    std::cout << "wrote " << out.size() << " rows to " << predPath.string() << '\n';
    return kExitOk;
}

int cmdEvaluate(RunConfig& c) {
    const fs::path outDir = outDirFrom(c);
    const SeriesChannel pred = readSeriesAuto(c.require("pred"));
    const SeriesChannel truth = readSeriesAuto(c.require("truth"));
    const ApplianceSpec spec = applianceFrom(c);
    const double period = c.real("grid_period", 3.0);

    const EvalMetrics m = evaluateSeries(pred, truth, spec.onThreshold, period);

    const fs::path metricsPath = outDir / "metrics.csv";
    {
        std::ofstream os(metricsPath, std::ios::binary);
        if (!os) throw DataError("cannot write metrics: " + metricsPath.string());
        os << "metric,value\n";
        os << "mae_watts," << formatDouble(m.maeWatts) << '\n';
        os << "on_state_mae_watts," << formatDouble(m.onStateMaeWatts) << '\n';
        os << "off_false_positive_wh," << formatDouble(m.offFalsePositiveWh) << '\n';
        os << "samples," << m.samples << '\n';
        os << "on_samples," << m.onSamples << '\n';
    }
    c.writeResolved(outDir / "evaluate.resolved.cfg");

    std::cout << "mae_watts " << m.maeWatts << '\n';
    std::cout << "on_state_mae_watts " << m.onStateMaeWatts << '\n';
    std::cout << "off_false_positive_wh " << m.offFalsePositiveWh << '\n';
    std::cout << "samples " << m.samples << " (on: " << m.onSamples << ")\n";
    return kExitOk;
}

int cmdGradcheck(RunConfig& c) {
    const fs::path outDir = outDirFrom(c);
    NetworkConfig reduced;
    reduced.inputLength = 64;
    reduced.outputLength = 8;
    reduced.gluStages = 3;
    reduced.convChannels = 8;
    reduced.kernelSize = 4;
    reduced.resBlocks = 1;
    reduced.resHidden = 50;
    const NetworkConfig netCfg = networkConfigFrom(c, reduced);

    GradientCheckOptions opts;
    opts.h = c.real("h", 1e-4);
    opts.minCoords = static_cast<int>(c.integer("min_coords", 500));
    opts.seed = netCfg.seed + 1;

    Network net = buildNetwork(netCfg);
    std::mt19937_64 rng(netCfg.seed + 2);
    Mat input(1, netCfg.inputLength);
    for (Index i = 0; i < input.size(); ++i) input.data()[i] = uniform01(rng);
    Vec target(netCfg.outputLength);
    for (Index i = 0; i < target.size(); ++i) target(i) = uniform01(rng);

    const GradientCheckResult result = gradientCheck(net, input, target, opts);

    std::ostringstream report;
    report << "sampled " << result.sampledCoords << " coordinates\n";
    report << "layer worst_coord analytic numeric rel_error\n";
    for (const LayerCheck& l : result.layers) {
        report << l.layer << ' ' << l.coord << ' ' << formatDouble(l.analytic) << ' '
               << formatDouble(l.numeric) << ' ' << formatDouble(l.relError) << '\n';
    }
    report << "max_rel_error " << formatDouble(result.maxRelError) << " at " << result.worst.layer
           << '[' << result.worst.coord << "]\n";
    std::cout << report.str();
    {
        std::ofstream os(outDir / "gradcheck_report.txt", std::ios::binary);
        os << report.str();
    }
    c.writeResolved(outDir / "gradcheck.resolved.cfg");

    constexpr double kThreshold = 1e-5;
    if (!(result.maxRelError < kThreshold)) {
        std::cout << "FAIL: max relative error " << result.maxRelError << " >= " << kThreshold
                  << '\n';
        return kExitCheckFailed;
    }
    std::cout << "OK\n";
    return kExitOk;
}

void printUsage() {
    std::cerr << "usage: nilm <synth|train|disaggregate|evaluate|gradcheck>"
                 " [--config <file>] [--key value ...]\n";
}

}  // namespace

int main(int argc, char** argv) {
    try {
        if (argc < 2) {
            printUsage();
            return kExitConfig;
        }
        const std::string command = argv[1];

        RunConfig config;
        std::optional<std::string> configFile;
        std::vector<std::pair<std::string, std::string>> overrides;
        for (int i = 2; i < argc; ++i) {
            const std::string arg = argv[i];
            if (arg.rfind("--", 0) != 0) {
                throw ConfigError("expected --key value, got '" + arg + "'");
            }
            if (i + 1 >= argc) throw ConfigError("flag '" + arg + "' is missing a value");
            const std::string value = argv[++i];
            if (arg == "--config") {
                if (configFile) throw ConfigError("--config given twice");
                configFile = value;
            } else {
                overrides.emplace_back(arg.substr(2), value);
            }
        }
        if (configFile) config.setFromFile(*configFile);
        for (const auto& [key, value] : overrides) config.set(key, value);

        if (command == "synth") return cmdSynth(config);
        if (command == "train") return cmdTrain(config);
        if (command == "disaggregate") return cmdDisaggregate(config);
        if (command == "evaluate") return cmdEvaluate(config);
        if (command == "gradcheck") return cmdGradcheck(config);
        printUsage();
        throw ConfigError("unknown command '" + command + "'");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInternal;
    }
}
