#include "nilm/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace nilm {

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kMagic = "nilm-checkpoint";

std::string formatDouble(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void writeDoublesLe(std::ostream& os, const double* data, std::streamsize count) {
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(data), count * 8);
    } else {
        for (std::streamsize i = 0; i < count; ++i) {
            auto bits = std::bit_cast<std::uint64_t>(data[i]);
            char bytes[8];
            for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
            os.write(bytes, 8);
        }
    }
}

void decodeDoublesLe(const char* bytes, double* out, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(out, bytes, count * 8);
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t bits = 0;
            for (int b = 7; b >= 0; --b) {
                bits = (bits << 8) | static_cast<unsigned char>(bytes[i * 8 + b]);
            }
            out[i] = std::bit_cast<double>(bits);
        }
    }
}

template <typename T>
T parseNumber(const std::string& key, const std::string& value) {
    std::istringstream is(value);
    T v{};
    is >> v;
    if (is.fail() || !(is >> std::ws).eof()) {
        throw CheckpointError(CheckpointError::Kind::MalformedHeader,
                              "checkpoint header: bad value for " + key + ": '" + value + "'");
    }
    return v;
}

}  // namespace

void saveCheckpoint(const Network& net, const CheckpointMeta& meta,
                    const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot open for writing: " + path.string());

    const NetworkConfig& c = net.config;
    os << kMagic << ' ' << kFormatVersion << '\n';
    os << "appliance " << meta.appliance << '\n';
    os << "aggregate_divisor " << formatDouble(meta.aggregateDivisor) << '\n';
    os << "appliance_divisor " << formatDouble(meta.applianceDivisor) << '\n';
    os << "train_source " << (meta.trainSource.empty() ? "-" : meta.trainSource) << '\n';
    os << "l_in " << c.inputLength << '\n';
    os << "l_out " << c.outputLength << '\n';
    os << "glu_stages " << c.gluStages << '\n';
    os << "conv_channels " << c.convChannels << '\n';
    os << "kernel_size " << c.kernelSize << '\n';
    os << "res_blocks " << c.resBlocks << '\n';
    os << "res_hidden " << c.resHidden << '\n';
    os << "seed " << c.seed << '\n';
    os << "param_count " << paramCount(net.params) << '\n';
    os << "payload\n";

    for (const auto& view : paramViews(net.params)) {
        writeDoublesLe(os, view.values.data(), view.values.size());
    }
    if (!os) throw DataError("checkpoint: write failed: " + path.string());
}

LoadedCheckpoint loadCheckpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open: " + path.string());

    std::string line;
    if (!std::getline(is, line)) {
        throw CheckpointError(CheckpointError::Kind::VersionMismatch,
                              "checkpoint: empty file: " + path.string());
    }
    {
        std::istringstream head(line);
        std::string magic;
        int version = -1;
        head >> magic >> version;
        if (magic != kMagic || version != kFormatVersion) {
            throw CheckpointError(CheckpointError::Kind::VersionMismatch,
                                  "checkpoint: expected '" + std::string(kMagic) + " " +
                                      std::to_string(kFormatVersion) + "', got '" + line + "'");
        }
    }

    std::map<std::string, std::string> fields;
    bool sawPayload = false;
    while (std::getline(is, line)) {
        if (line == "payload") {
            sawPayload = true;
            break;
        }
        const auto space = line.find(' ');
        if (space == std::string::npos || space == 0) {
            throw CheckpointError(CheckpointError::Kind::MalformedHeader,
                                  "checkpoint header: malformed line '" + line + "'");
        }
        fields[line.substr(0, space)] = line.substr(space + 1);
    }
    if (!sawPayload) {
        throw CheckpointError(CheckpointError::Kind::MalformedHeader,
                              "checkpoint header: missing payload marker");
    }

    static const char* required[] = {"appliance",   "aggregate_divisor", "appliance_divisor",
                                     "train_source", "l_in",             "l_out",
                                     "glu_stages",  "conv_channels",     "kernel_size",
                                     "res_blocks",  "res_hidden",        "seed",
                                     "param_count"};
    for (const char* key : required) {
        if (!fields.count(key)) {
            throw CheckpointError(CheckpointError::Kind::MalformedHeader,
                                  "checkpoint header: missing field '" + std::string(key) + "'");
        }
    }
    if (fields.size() != std::size(required)) {
        for (const auto& [key, value] : fields) {
            bool known = false;
            for (const char* k : required) known = known || key == k;
            if (!known) {
                throw CheckpointError(CheckpointError::Kind::MalformedHeader,
                                      "checkpoint header: unknown field '" + key + "'");
            }
        }
    }

    NetworkConfig cfg;
    cfg.inputLength = parseNumber<Index>("l_in", fields["l_in"]);
    cfg.outputLength = parseNumber<Index>("l_out", fields["l_out"]);
    cfg.gluStages = parseNumber<int>("glu_stages", fields["glu_stages"]);
    cfg.convChannels = parseNumber<Index>("conv_channels", fields["conv_channels"]);
    cfg.kernelSize = parseNumber<Index>("kernel_size", fields["kernel_size"]);
    cfg.resBlocks = parseNumber<int>("res_blocks", fields["res_blocks"]);
    cfg.resHidden = parseNumber<Index>("res_hidden", fields["res_hidden"]);
    cfg.seed = parseNumber<std::uint64_t>("seed", fields["seed"]);
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw CheckpointError(CheckpointError::Kind::MalformedHeader,
                              std::string("checkpoint header: ") + e.what());
    }

    LoadedCheckpoint loaded{buildNetwork(cfg), CheckpointMeta{}};
    loaded.meta.appliance = fields["appliance"];
    loaded.meta.aggregateDivisor = parseNumber<double>("aggregate_divisor",
                                                       fields["aggregate_divisor"]);
    loaded.meta.applianceDivisor = parseNumber<double>("appliance_divisor",
                                                       fields["appliance_divisor"]);
    loaded.meta.trainSource = fields["train_source"] == "-" ? "" : fields["train_source"];

    const Index declared = parseNumber<Index>("param_count", fields["param_count"]);
    const Index actual = paramCount(loaded.net.params);
    if (declared != actual) {
        throw CheckpointError(CheckpointError::Kind::PayloadSizeMismatch,
                              "checkpoint: header declares " + std::to_string(declared) +
                                  " parameters, config implies " + std::to_string(actual));
    }

    std::vector<char> payload(static_cast<std::size_t>(actual) * 8);
    is.read(payload.data(), static_cast<std::streamsize>(payload.size()));
    const std::streamsize got = is.gcount();
    if (got == 0 && actual > 0) {
        throw CheckpointError(CheckpointError::Kind::PayloadMissing,
                              "checkpoint: header present but payload missing: " + path.string());
    }
    if (got != static_cast<std::streamsize>(payload.size())) {
        throw CheckpointError(CheckpointError::Kind::PayloadSizeMismatch,
                              "checkpoint: payload has " + std::to_string(got) + " bytes, expected " +
                                  std::to_string(payload.size()));
    }
    if (is.peek() != std::ifstream::traits_type::eof()) {
        throw CheckpointError(CheckpointError::Kind::PayloadSizeMismatch,
                              "checkpoint: trailing bytes after payload: " + path.string());
    }

    std::size_t offset = 0;
    for (auto& view : paramViews(loaded.net.params)) {
        decodeDoublesLe(payload.data() + offset * 8, view.values.data(),
                        static_cast<std::size_t>(view.values.size()));
        offset += static_cast<std::size_t>(view.values.size());
    }
    return loaded;
}

}  // namespace nilm
