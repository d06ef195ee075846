#include "nilm/network.hpp"

#include <cmath>
#include <random>
#include <utility>

#include "nilm/rng.hpp"

namespace nilm {

void NetworkConfig::validate() const {
    if (gluStages < 1 || gluStages > 30) {
        throw ConfigError("network config: gluStages must be in [1, 30], got " +
                          std::to_string(gluStages));
    }
    if (outputLength < 2 || outputLength % 2 != 0) {
        throw ConfigError("network config: outputLength must be even and positive, got " +
                          std::to_string(outputLength));
    }
    if (inputLength != (outputLength << gluStages)) {
        throw ConfigError("network config: inputLength must be outputLength * 2^gluStages; got " +
                          std::to_string(inputLength) + " with outputLength " +
                          std::to_string(outputLength) + " and " + std::to_string(gluStages) +
                          " stages");
    }
    if (convChannels < 1 || kernelSize < 1 || resHidden < 1) {
        throw ConfigError("network config: convChannels, kernelSize, resHidden must be positive");
    }
    if (resBlocks < 0) {
        throw ConfigError("network config: resBlocks must be >= 0, got " + std::to_string(resBlocks));
    }
}

namespace {

void glorotFill(Mat& w, Index fanIn, Index fanOut, std::mt19937_64& rng) {
    const Scalar limit = std::sqrt(6.0 / static_cast<Scalar>(fanIn + fanOut));
    Scalar* d = w.data();
    for (Index i = 0; i < w.size(); ++i) {
        d[i] = limit * (2.0 * uniform01(rng) - 1.0);
    }
}

Index stageInChannels(const NetworkConfig& cfg, int stage) {
    return stage == 0 ? 1 : cfg.convChannels;
}

}  // namespace

Network buildNetwork(const NetworkConfig& config) {
    config.validate();
    Network net;
    net.config = config;

    ParamSet& p = net.params;
    p.glu.reserve(static_cast<std::size_t>(config.gluStages));
    for (int s = 0; s < config.gluStages; ++s) {
        const Index cin = stageInChannels(config, s);
        p.glu.push_back({makeConvParams(cin, config.convChannels, config.kernelSize),
                         makeConvParams(cin, config.convChannels, config.kernelSize)});
    }
    p.dense1 = makeDenseParams(config.flattenSize(), config.outputLength);
    p.residual.reserve(static_cast<std::size_t>(config.resBlocks));
    for (int b = 0; b < config.resBlocks; ++b) {
        p.residual.push_back({makeDenseParams(config.outputLength, config.resHidden),
                              makeDenseParams(config.resHidden, config.outputLength)});
    }
    p.output = makeDenseParams(config.outputLength, config.outputLength);

    std::mt19937_64 rng(config.seed);
    for (int s = 0; s < config.gluStages; ++s) {
        const Index cin = stageInChannels(config, s);
        const Index fanIn = cin * config.kernelSize;
        const Index fanOut = config.convChannels * config.kernelSize;
        glorotFill(p.glu[static_cast<std::size_t>(s)].main.weight, fanIn, fanOut, rng);
        glorotFill(p.glu[static_cast<std::size_t>(s)].gate.weight, fanIn, fanOut, rng);
    }
    glorotFill(p.dense1.weight, config.flattenSize(), config.outputLength, rng);
    for (int b = 0; b < config.resBlocks; ++b) {
        glorotFill(p.residual[static_cast<std::size_t>(b)].hidden.weight, config.outputLength,
                   config.resHidden, rng);
        glorotFill(p.residual[static_cast<std::size_t>(b)].out.weight, config.resHidden,
                   config.outputLength, rng);
    }
    glorotFill(p.output.weight, config.outputLength, config.outputLength, rng);
    return net;
}

namespace {

template <typename View, typename Set>
std::vector<View> collectViews(Set& p) {
    std::vector<View> out;
    auto add = [&out](std::string name, auto& tensor) {
        out.push_back(View{std::move(name), {tensor.data(), tensor.size()}});
    };
    for (std::size_t s = 0; s < p.glu.size(); ++s) {
        const std::string prefix = "glu" + std::to_string(s);
        add(prefix + ".main.weight", p.glu[s].main.weight);
        add(prefix + ".main.bias", p.glu[s].main.bias);
        add(prefix + ".gate.weight", p.glu[s].gate.weight);
        add(prefix + ".gate.bias", p.glu[s].gate.bias);
    }
    add("dense1.weight", p.dense1.weight);
    add("dense1.bias", p.dense1.bias);
    for (std::size_t b = 0; b < p.residual.size(); ++b) {
        const std::string prefix = "res" + std::to_string(b);
        add(prefix + ".hidden.weight", p.residual[b].hidden.weight);
        add(prefix + ".hidden.bias", p.residual[b].hidden.bias);
        add(prefix + ".out.weight", p.residual[b].out.weight);
        add(prefix + ".out.bias", p.residual[b].out.bias);
    }
    add("output.weight", p.output.weight);
    add("output.bias", p.output.bias);
    return out;
}

}  // namespace

std::vector<ParamView> paramViews(ParamSet& p) { return collectViews<ParamView>(p); }

std::vector<ConstParamView> paramViews(const ParamSet& p) { return collectViews<ConstParamView>(p); }

Index paramCount(const ParamSet& p) {
    Index n = 0;
    for (const auto& v : paramViews(p)) n += v.values.size();
    return n;
}

ParamSet zeroLike(const ParamSet& p) {
    ParamSet z = p;
    setZero(z);
    return z;
}

void setZero(ParamSet& p) {
    for (auto& v : paramViews(p)) v.values.setZero();
}

void addInPlace(ParamSet& dst, const ParamSet& src) {
    auto d = paramViews(dst);
    auto s = paramViews(static_cast<const ParamSet&>(src));
    if (d.size() != s.size()) throw ShapeError("param sets have different layouts");
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i].values.size() != s[i].values.size()) {
            throw ShapeError("param tensor " + d[i].name + " size mismatch: " +
                             std::to_string(d[i].values.size()) + " vs " +
                             std::to_string(s[i].values.size()));
        }
        d[i].values += s[i].values;
    }
}

void scaleInPlace(ParamSet& p, Scalar factor) {
    for (auto& v : paramViews(p)) v.values *= factor;
}

Mat gluBlockForward(const Mat& input, const ConvParams& main, const ConvParams& gate) {
    const Mat patches = im2colSame(input, main.kernelSize);
    if (main.inChannels != input.rows()) {
        throw ShapeError("glu block: input has " + std::to_string(input.rows()) +
                         " channels, main pathway expects " + std::to_string(main.inChannels));
    }
    const Mat a = convFromPatches(patches, main);
    const Mat b = convFromPatches(patches, gate);
    return a.cwiseProduct(sigmoid(b));
}

Vec residualBlockForward(const Vec& input, const ResidualParams& block) {
    const Vec hidden = relu(dense(input, block.hidden));
    return dense(hidden, block.out) + input;
}

Vec forward(const Network& net, const Mat& input, ForwardCache* cache) {
    const NetworkConfig& cfg = net.config;
    const ParamSet& p = net.params;
    if (input.rows() != stageInChannels(cfg, 0)) {
        throw ShapeError("forward: input has " + std::to_string(input.rows()) +
                         " channels, network expects " + std::to_string(stageInChannels(cfg, 0)));
    }
    if (input.cols() != cfg.inputLength) {
        throw ShapeError("forward: input length " + std::to_string(input.cols()) +
                         " does not match configured " + std::to_string(cfg.inputLength));
    }
    if (cache) {
        cache->stages.clear();
        cache->residual.clear();
        cache->valid = false;
    }

    Mat cur = input;
    for (int s = 0; s < cfg.gluStages; ++s) {
        const GluParams& g = p.glu[static_cast<std::size_t>(s)];
        Mat patches = im2colSame(cur, cfg.kernelSize);
        Mat a = convFromPatches(patches, g.main);
        Mat gateSig = sigmoid(convFromPatches(patches, g.gate));
        MaxPool2 pool = maxPool2(a.cwiseProduct(gateSig));
        if (cache) {
            cache->stages.push_back({std::move(patches), std::move(a), std::move(gateSig),
                                     std::move(pool.argmax)});
        }
        cur = std::move(pool.output);
    }

    Vec flat = Eigen::Map<const Vec>(cur.data(), cur.size());
    Vec d1 = relu(dense(flat, p.dense1));

    Vec z = d1;
    for (int b = 0; b < cfg.resBlocks; ++b) {
        const ResidualParams& rb = p.residual[static_cast<std::size_t>(b)];
        Vec hidden = relu(dense(z, rb.hidden));
        Vec r = dense(hidden, rb.out) + z;
        if (cache) cache->residual.push_back({std::move(z), std::move(hidden)});
        z = std::move(r);
    }

    Vec out = dense(z, p.output);
    if (cache) {
        cache->flat = std::move(flat);
        cache->dense1Out = std::move(d1);
        cache->resOut = std::move(z);
        cache->valid = true;
    }
    return out;
}

Vec forward(const Network& net, const Vec& input, ForwardCache* cache) {
    Eigen::Map<const Mat> asRow(input.data(), 1, input.size());
    return forward(net, Mat(asRow), cache);
}

std::vector<Vec> forwardBatch(const Network& net, const std::vector<Vec>& inputs) {
    std::vector<Vec> outputs;
    outputs.reserve(inputs.size());
    for (const Vec& x : inputs) outputs.push_back(forward(net, x));
    return outputs;
}

Gradients backward(const Network& net, const ForwardCache& cache, const Vec& gradOutput) {
    const NetworkConfig& cfg = net.config;
    const ParamSet& p = net.params;
    if (!cache.valid) {
        throw Error("backward: cache is not the result of a completed forward pass");
    }
    if (cache.stages.size() != static_cast<std::size_t>(cfg.gluStages) ||
        cache.residual.size() != static_cast<std::size_t>(cfg.resBlocks)) {
        throw Error("backward: cache does not match the network configuration");
    }
    if (gradOutput.size() != cfg.outputLength) {
        throw ShapeError("backward: gradient length " + std::to_string(gradOutput.size()) +
                         " does not match output length " + std::to_string(cfg.outputLength));
    }

    Gradients g;
    g.glu.resize(static_cast<std::size_t>(cfg.gluStages));
    g.residual.resize(static_cast<std::size_t>(cfg.resBlocks));

    DenseGrads od = denseBackward(cache.resOut, p.output, gradOutput);
    g.output = std::move(od.params);
    Vec grad = std::move(od.input);

    for (int b = cfg.resBlocks - 1; b >= 0; --b) {
        const auto& rc = cache.residual[static_cast<std::size_t>(b)];
        const ResidualParams& rb = p.residual[static_cast<std::size_t>(b)];
        DenseGrads d2 = denseBackward(rc.hiddenOut, rb.out, grad);
        Vec gradHidden = reluBackward(rc.hiddenOut, d2.input);
        DenseGrads d1 = denseBackward(rc.input, rb.hidden, gradHidden);
        g.residual[static_cast<std::size_t>(b)] = {std::move(d1.params), std::move(d2.params)};
        grad += d1.input;  // shortcut path
    }

    Vec gradPre = reluBackward(cache.dense1Out, grad);
    DenseGrads dd = denseBackward(cache.flat, p.dense1, gradPre);
    g.dense1 = std::move(dd.params);

    Mat gradCur = Eigen::Map<const Mat>(dd.input.data(), cfg.convChannels, cfg.pooledLength());
    for (int s = cfg.gluStages - 1; s >= 0; --s) {
        const auto& sc = cache.stages[static_cast<std::size_t>(s)];
        const GluParams& gp = p.glu[static_cast<std::size_t>(s)];
        const Mat gradGlu = maxPool2Backward(sc.poolArgmax, gradCur);
        const Mat gradA = gradGlu.cwiseProduct(sc.gateSig);
        const Mat gradGatePre = sigmoidBackward(sc.gateSig, Mat(gradGlu.cwiseProduct(sc.mainOut)));
        g.glu[static_cast<std::size_t>(s)].main = convParamGrads(sc.patches, gradA, gp.main);
        g.glu[static_cast<std::size_t>(s)].gate = convParamGrads(sc.patches, gradGatePre, gp.gate);
        if (s > 0) {
            const Mat patchGrads =
                gp.main.weight * gradA + gp.gate.weight * gradGatePre;
            gradCur = col2imSame(patchGrads, stageInChannels(cfg, s), cfg.kernelSize,
                                 cfg.inputLength >> s);
        }
    }
    return g;
}

}  // namespace nilm
