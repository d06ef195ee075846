#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nilm/tensor_ops.hpp"
#include "nilm/types.hpp"

namespace nilm {

/// Geometry and seed of the disaggregation network. The stack is
///   input -> [gated conv block -> maxpool/2] x gluStages
///         -> flatten -> dense+relu (outputLength)
///         -> residual blocks -> linear dense (outputLength).
struct NetworkConfig {
    Index inputLength = 800;
    Index outputLength = 100;
    int gluStages = 3;
    Index convChannels = 100;
    Index kernelSize = 4;
    int resBlocks = 2;
    Index resHidden = 50;
    std::uint64_t seed = 0;

    /// Sequence length after the pooling chain.
    Index pooledLength() const { return inputLength >> gluStages; }
    /// Input width of the first fully connected layer.
    Index flattenSize() const { return convChannels * pooledLength(); }

    /// Throws ConfigError when the geometry is inconsistent
    /// (inputLength must equal outputLength * 2^gluStages, outputLength even).
    void validate() const;
};

/// One gated convolution block: the main pathway and the sigmoid gate
/// pathway convolve the same input.
struct GluParams {
    ConvParams main;
    ConvParams gate;
};

/// Two fully connected layers around a relu, added back onto the input.
struct ResidualParams {
    DenseParams hidden;  // outputLength -> resHidden
    DenseParams out;     // resHidden -> outputLength
};

/// Every trainable tensor of the network, in serialization order.
/// Gradients, optimizer moments, and checkpoints all mirror this layout.
struct ParamSet {
    std::vector<GluParams> glu;
    DenseParams dense1;
    std::vector<ResidualParams> residual;
    DenseParams output;
};

using Gradients = ParamSet;

struct Network {
    NetworkConfig config;
    ParamSet params;
};

/// Validates the config, allocates all parameters, and initializes weights
/// Glorot-uniform (biases zero) deterministically from config.seed.
Network buildNetwork(const NetworkConfig& config);

/// Named flat view over one parameter tensor.
struct ParamView {
    std::string name;
    Eigen::Map<Vec> values;
};

struct ConstParamView {
    std::string name;
    Eigen::Map<const Vec> values;
};

std::vector<ParamView> paramViews(ParamSet& p);
std::vector<ConstParamView> paramViews(const ParamSet& p);
Index paramCount(const ParamSet& p);

ParamSet zeroLike(const ParamSet& p);
void setZero(ParamSet& p);
void addInPlace(ParamSet& dst, const ParamSet& src);
void scaleInPlace(ParamSet& p, Scalar factor);

/// Per-layer activations recorded by a forward pass; required by backward.
struct ForwardCache {
    struct Stage {
        Mat patches;   // im2col of the stage input (shared by both pathways)
        Mat mainOut;   // A
        Mat gateSig;   // sigmoid(B)
        Eigen::ArrayXXi poolArgmax;
    };
    std::vector<Stage> stages;
    Vec flat;
    Vec dense1Out;  // post-relu
    struct Residual {
        Vec input;
        Vec hiddenOut;  // post-relu
    };
    std::vector<Residual> residual;
    Vec resOut;  // input of the output layer
    bool valid = false;
};

/// Gated block: conv(main) * sigmoid(conv(gate)) elementwise, both pathways
/// convolving the same input.
Mat gluBlockForward(const Mat& input, const ConvParams& main, const ConvParams& gate);

/// r(z) = dense2(relu(dense1(z))) + z; the second layer is linear.
Vec residualBlockForward(const Vec& input, const ResidualParams& block);

/// Maps a (channels x inputLength) window to an outputLength vector.
/// Deterministic; pass a cache to enable backward.
Vec forward(const Network& net, const Mat& input, ForwardCache* cache = nullptr);
Vec forward(const Network& net, const Vec& input, ForwardCache* cache = nullptr);

std::vector<Vec> forwardBatch(const Network& net, const std::vector<Vec>& inputs);

/// Exact chain-rule gradients for every parameter tensor. Throws Error when
/// the cache does not come from a completed forward pass.
Gradients backward(const Network& net, const ForwardCache& cache, const Vec& gradOutput);

}  // namespace nilm
