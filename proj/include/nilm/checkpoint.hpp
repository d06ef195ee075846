#pragma once

#include <filesystem>
#include <string>

#include "nilm/network.hpp"
#include "nilm/types.hpp"

namespace nilm {

/// Normalization constants and provenance stored alongside the parameters.
struct CheckpointMeta {
    std::string appliance = "appliance";
    double aggregateDivisor = 1000.0;  // watts
    double applianceDivisor = 1.0;     // watts
    std::string trainSource;           // ';'-joined canonical input paths, may be empty
};

class CheckpointError : public DataError {
public:
    enum class Kind {
        VersionMismatch,
        MalformedHeader,
        PayloadMissing,
        PayloadSizeMismatch,
    };

    CheckpointError(Kind kind, const std::string& message) : DataError(message), kind(kind) {}

    Kind kind;
};

/// File layout: a text header of "key value" lines opened by
/// "nilm-checkpoint <version>" and closed by "payload", followed by every
/// parameter tensor as little-endian float64 in declaration order.
/// save -> load -> save reproduces the file byte for byte.
void saveCheckpoint(const Network& net, const CheckpointMeta& meta,
                    const std::filesystem::path& path);

struct LoadedCheckpoint {
    Network net;
    CheckpointMeta meta;
};

LoadedCheckpoint loadCheckpoint(const std::filesystem::path& path);

}  // namespace nilm
