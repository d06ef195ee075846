#include "nilm/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "nilm/rng.hpp"

namespace nilm {

MaeResult maeLoss(const Vec& pred, const Vec& target) {
    if (pred.size() != target.size()) {
        throw ShapeError("mae: prediction length " + std::to_string(pred.size()) +
                         " does not match target length " + std::to_string(target.size()));
    }
    const Index n = pred.size();
    const Vec diff = pred - target;
    MaeResult r;
    r.loss = diff.array().abs().mean();
    r.grad = diff.array().sign().matrix() / static_cast<double>(n);
    return r;
}

void AdamConfig::validate() const {
    if (learningRate <= 0.0) throw ConfigError("adam: learning rate must be positive");
    if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0) {
        throw ConfigError("adam: betas must lie in (0, 1)");
    }
    if (epsilon <= 0.0) throw ConfigError("adam: epsilon must be positive");
}

AdamState AdamState::forParams(const ParamSet& params) {
    AdamState s;
    s.m = zeroLike(params);
    s.v = zeroLike(params);
    s.step = 0;
    return s;
}

void adamUpdate(Eigen::Ref<Vec> param, const Eigen::Ref<const Vec>& grad, Eigen::Ref<Vec> m,
                Eigen::Ref<Vec> v, long step, const AdamConfig& cfg) {
    if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
        throw ShapeError("adam: parameter/gradient/state sizes disagree: " +
                         std::to_string(param.size()) + "/" + std::to_string(grad.size()) + "/" +
                         std::to_string(m.size()) + "/" + std::to_string(v.size()));
    }
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
    const double mCorr = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double vCorr = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    param.array() -=
        cfg.learningRate * (m.array() / mCorr) / ((v.array() / vCorr).sqrt() + cfg.epsilon);
}

void adamStep(ParamSet& params, const ParamSet& grads, AdamState& state, const AdamConfig& cfg) {
    cfg.validate();
    auto pv = paramViews(params);
    auto gv = paramViews(grads);
    auto mv = paramViews(state.m);
    auto vv = paramViews(state.v);
    if (pv.size() != gv.size() || pv.size() != mv.size() || pv.size() != vv.size()) {
        throw ShapeError("adam: gradient/state layout does not match parameters");
    }
    state.step += 1;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        adamUpdate(pv[i].values, gv[i].values, mv[i].values, vv[i].values, state.step, cfg);
    }
}

void TrainConfig::validate() const {
    adam.validate();
    if (batchSize < 1) throw ConfigError("train: batch size must be >= 1");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (valFraction < 0.0 || valFraction >= 1.0) {
        throw ConfigError("train: validation fraction must lie in [0, 1)");
    }
}

namespace {

void fisherYatesShuffle(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
}

double meanMae(const Network& net, const std::vector<WindowPair>& pairs, std::size_t begin,
               std::size_t end) {
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
        sum += maeLoss(forward(net, pairs[i].input), pairs[i].target).loss;
    }
    return sum / static_cast<double>(end - begin);
}

}  // namespace

TrainResult train(Network& net, const std::vector<WindowPair>& pairs, const TrainConfig& cfg,
                  const std::function<void(const EpochStats&)>& onEpoch) {
    cfg.validate();
    if (pairs.empty()) throw DataError("train: empty dataset");
    for (const WindowPair& p : pairs) {
        if (p.target.size() != net.config.outputLength) {
            throw ShapeError("train: window pair target length " + std::to_string(p.target.size()) +
                             " does not match network output " +
                             std::to_string(net.config.outputLength));
        }
    }

    const std::size_t nVal =
        static_cast<std::size_t>(static_cast<double>(pairs.size()) * cfg.valFraction);
    const std::size_t nTrain = pairs.size() - nVal;

    std::vector<std::size_t> order(nTrain);
    for (std::size_t i = 0; i < nTrain; ++i) order[i] = i;
    std::mt19937_64 rng(cfg.shuffleSeed);

    AdamState state = AdamState::forParams(net.params);
    ParamSet grads = zeroLike(net.params);

    TrainResult result;
    result.bestEpoch = 0;
    double bestScore = std::numeric_limits<double>::infinity();
    ForwardCache cache;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        fisherYatesShuffle(order, rng);

        double epochLossSum = 0.0;
        for (std::size_t start = 0; start < nTrain; start += static_cast<std::size_t>(cfg.batchSize)) {
            const std::size_t stop = std::min(nTrain, start + static_cast<std::size_t>(cfg.batchSize));
            setZero(grads);
            for (std::size_t b = start; b < stop; ++b) {
                const WindowPair& wp = pairs[order[b]];
                const Vec pred = forward(net, wp.input, &cache);
                MaeResult mae = maeLoss(pred, wp.target);
                epochLossSum += mae.loss;
                addInPlace(grads, backward(net, cache, mae.grad));
            }
            scaleInPlace(grads, 1.0 / static_cast<double>(stop - start));
            adamStep(net.params, grads, state, cfg.adam);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.trainMae = epochLossSum / static_cast<double>(nTrain);
        stats.valMae = nVal > 0 ? meanMae(net, pairs, nTrain, pairs.size())
                                : std::numeric_limits<double>::quiet_NaN();
        result.history.push_back(stats);
        if (onEpoch) onEpoch(stats);

        const double score = nVal > 0 ? stats.valMae : stats.trainMae;
        if (score < bestScore) {
            bestScore = score;
            result.bestEpoch = epoch;
            result.bestParams = net.params;
        }
    }

    net.params = result.bestParams;
    return result;
}

namespace {

double lossAt(const Network& net, const Mat& input, const Vec& target) {
    return maeLoss(forward(net, input), target).loss;
}

}  // namespace

GradientCheckResult gradientCheckAgainst(Network& net, const Mat& input, const Vec& target,
                                         const ParamSet& analytic,
                                         const GradientCheckOptions& opts) {
    auto params = paramViews(net.params);
    auto grads = paramViews(analytic);
    if (params.size() != grads.size()) {
        throw ShapeError("gradient check: analytic gradients do not match parameter layout");
    }

    Index total = 0;
    for (const auto& view : params) total += view.values.size();

    std::vector<int> samplesPerTensor(params.size());
    int planned = 0;
    std::size_t largest = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Index size = params[i].values.size();
        int n = static_cast<int>((static_cast<long long>(opts.minCoords) * size) / total);
        n = std::max(2, std::min<int>(n, static_cast<int>(size)));
        samplesPerTensor[i] = n;
        planned += n;
        if (params[i].values.size() > params[largest].values.size()) largest = i;
    }
    if (planned < opts.minCoords) {
        const int extra = opts.minCoords - planned;
        samplesPerTensor[largest] = std::min<int>(
            static_cast<int>(params[largest].values.size()), samplesPerTensor[largest] + extra);
    }

    std::mt19937_64 rng(opts.seed);
    GradientCheckResult result;
    for (std::size_t i = 0; i < params.size(); ++i) {
        LayerCheck layerWorst;
        layerWorst.layer = params[i].name;
        const Index size = params[i].values.size();
        for (int s = 0; s < samplesPerTensor[i]; ++s) {
            const Index coord = static_cast<Index>(rng() % static_cast<std::uint64_t>(size));
            double& slot = params[i].values(coord);
            const double saved = slot;
            slot = saved + opts.h;
            const double up = lossAt(net, input, target);
            slot = saved - opts.h;
            const double down = lossAt(net, input, target);
            slot = saved;

            const double numeric = (up - down) / (2.0 * opts.h);
            const double analyticVal = grads[i].values(coord);
            result.sampledCoords += 1;
            if (std::abs(numeric) < 1e-12 && std::abs(analyticVal) < 1e-12) continue;
            const double rel =
                std::abs(analyticVal - numeric) / std::max(std::abs(analyticVal), std::abs(numeric));
            if (rel > layerWorst.relError) {
                layerWorst = {params[i].name, coord, analyticVal, numeric, rel};
            }
        }
        result.layers.push_back(layerWorst);
        if (layerWorst.relError > result.maxRelError) {
            result.maxRelError = layerWorst.relError;
            result.worst = layerWorst;
        }
    }
    return result;
}

GradientCheckResult gradientCheck(Network& net, const Mat& input, const Vec& target,
                                  const GradientCheckOptions& opts) {
    ForwardCache cache;
    const Vec pred = forward(net, input, &cache);
    const MaeResult mae = maeLoss(pred, target);
    const Gradients analytic = backward(net, cache, mae.grad);
    return gradientCheckAgainst(net, input, target, analytic, opts);
}

}  // namespace nilm
