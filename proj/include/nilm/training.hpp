#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nilm/network.hpp"
#include "nilm/types.hpp"
#include "nilm/windowing.hpp"

namespace nilm {

struct MaeResult {
    double loss;
    Vec grad;  // sign(pred - target) / length, zero where the difference is zero
};

MaeResult maeLoss(const Vec& pred, const Vec& target);

struct AdamConfig {
    double learningRate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

/// First/second moment estimates mirroring the parameter layout.
struct AdamState {
    ParamSet m;
    ParamSet v;
    long step = 0;

    static AdamState forParams(const ParamSet& params);
};

/// One bias-corrected update of a single tensor; `step` counts from 1.
void adamUpdate(Eigen::Ref<Vec> param, const Eigen::Ref<const Vec>& grad, Eigen::Ref<Vec> m,
                Eigen::Ref<Vec> v, long step, const AdamConfig& cfg);

/// Applies adamUpdate across the whole parameter set and advances the step
/// counter. Throws ShapeError when gradient and state layouts disagree.
void adamStep(ParamSet& params, const ParamSet& grads, AdamState& state, const AdamConfig& cfg);

struct TrainConfig {
    int batchSize = 32;
    AdamConfig adam;
    int epochs = 10;
    std::uint64_t shuffleSeed = 0;
    double valFraction = 0.1;  // chronological tail split

    void validate() const;
};

struct EpochStats {
    int epoch;        // 1-based
    double trainMae;  // mean over the epoch's mini-batch losses
    double valMae;    // NaN when the validation split is empty
};

struct TrainResult {
    ParamSet bestParams;
    int bestEpoch;
    std::vector<EpochStats> history;
};

/// Mini-batch training: shuffles the training split each epoch with the
/// seeded RNG (final short batch kept), tracks per-epoch train/validation
/// MAE, and selects the epoch with the best validation MAE (train MAE when
/// no validation split). On return net holds the selected parameters.
TrainResult train(Network& net, const std::vector<WindowPair>& pairs, const TrainConfig& cfg,
                  const std::function<void(const EpochStats&)>& onEpoch = {});

struct GradientCheckOptions {
    // central differences bottom out near 1e-6 relative once rounding noise
    // in the loss meets the h^2 truncation term; 1e-4 sits at that optimum
    double h = 1e-4;
    int minCoords = 500;
    std::uint64_t seed = 0;
};

struct LayerCheck {
    std::string layer;
    Index coord = -1;
    double analytic = 0.0;
    double numeric = 0.0;
    double relError = 0.0;
};

struct GradientCheckResult {
    double maxRelError = 0.0;
    LayerCheck worst;
    std::vector<LayerCheck> layers;  // worst sampled coordinate per tensor
    int sampledCoords = 0;
};

/// Central-difference check of backward() on the MAE loss: samples at least
/// minCoords coordinates spread over every parameter tensor. Coordinates
/// where analytic and numeric gradients are both below 1e-12 are skipped.
GradientCheckResult gradientCheck(Network& net, const Mat& input, const Vec& target,
                                  const GradientCheckOptions& opts = {});

/// Same check against externally supplied analytic gradients (lets tests
/// verify that a corrupted gradient is flagged).
GradientCheckResult gradientCheckAgainst(Network& net, const Mat& input, const Vec& target,
                                         const ParamSet& analytic,
                                         const GradientCheckOptions& opts = {});

}  // namespace nilm
