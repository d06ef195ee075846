#pragma once

#include <utility>

#include "nilm/types.hpp"

namespace nilm {

/// Filter bank and bias of a 1-D convolution. Column o of `weight` is the
/// filter for output channel o, laid out as (input channel i, tap j) ->
/// row i + j * inChannels, so a column maps directly onto an
/// inChannels x kernelSize matrix.
struct ConvParams {
    Mat weight;  // (inChannels * kernelSize) x outChannels
    Vec bias;    // outChannels
    Index inChannels = 0;
    Index kernelSize = 0;

    Index outChannels() const { return weight.cols(); }
};

/// Zero-filled parameters of the given geometry.
ConvParams makeConvParams(Index inChannels, Index outChannels, Index kernelSize);

struct DenseParams {
    Mat weight;  // outputs x inputs
    Vec bias;    // outputs
};

DenseParams makeDenseParams(Index inputs, Index outputs);

// Same-padding split: for even kernels the extra zero goes on the right.
inline Index convPadLeft(Index kernelSize) { return (kernelSize - 1) / 2; }

/// Patch matrix of a same-padded 1-D window: column t stacks the kernelSize
/// taps of every input channel around position t, zero outside the edges.
Mat im2colSame(const Mat& input, Index kernelSize);

/// Adjoint of im2colSame: scatter-adds patch-space gradients back onto the
/// unpadded input.
Mat col2imSame(const Mat& patchGrads, Index inChannels, Index kernelSize, Index length);

/// Cross-correlation with zero same-padding; output length equals input
/// length. The patch-based entry point lets callers reuse one patch matrix
/// across several filter banks over the same input.
Mat conv1dSame(const Mat& input, const ConvParams& params);
Mat convFromPatches(const Mat& patches, const ConvParams& params);

/// Parameter gradients of conv1dSame given the forward patch matrix.
ConvParams convParamGrads(const Mat& patches, const Mat& gradOut, const ConvParams& params);

/// Patch-space input gradients (combine with col2imSame for the full input
/// gradient; contributions of filter banks sharing an input may be summed in
/// patch space first).
Mat convPatchGrads(const ConvParams& params, const Mat& gradOut);

struct Conv1dGrads {
    Mat input;
    ConvParams params;
};

Conv1dGrads conv1dSameBackward(const Mat& input, const ConvParams& params, const Mat& gradOut);

struct MaxPool2 {
    Mat output;             // channels x length/2
    Eigen::ArrayXXi argmax; // winning input column per pooled cell; ties -> earlier
};

MaxPool2 maxPool2(const Mat& input);
Mat maxPool2Backward(const Eigen::ArrayXXi& argmax, const Mat& gradOut);

Vec dense(const Vec& input, const DenseParams& params);

struct DenseGrads {
    Vec input;
    DenseParams params;
};

DenseGrads denseBackward(const Vec& input, const DenseParams& params, const Vec& gradOut);

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
    using Plain = typename Derived::PlainObject;
    return Plain((1.0 / (1.0 + (-x.array()).exp())).matrix());
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
    using Plain = typename Derived::PlainObject;
    return Plain(x.array().max(0.0).matrix());
}

// Backward passes are expressed with the forward output: sigmoid' = y(1-y),
// relu' = [y > 0] (zero at the kink).
template <typename D1, typename D2>
auto sigmoidBackward(const Eigen::MatrixBase<D1>& y, const Eigen::MatrixBase<D2>& gradOut) {
    using Plain = typename D1::PlainObject;
    return Plain((gradOut.array() * y.array() * (1.0 - y.array())).matrix());
}

template <typename D1, typename D2>
auto reluBackward(const Eigen::MatrixBase<D1>& y, const Eigen::MatrixBase<D2>& gradOut) {
    using Plain = typename D1::PlainObject;
    return Plain((gradOut.array() * (y.array() > 0.0).template cast<Scalar>()).matrix());
}

Mat elementwiseMul(const Mat& a, const Mat& b);

/// Gradients with respect to (a, b) of the elementwise product.
std::pair<Mat, Mat> elementwiseMulBackward(const Mat& a, const Mat& b, const Mat& gradOut);

}  // namespace nilm
