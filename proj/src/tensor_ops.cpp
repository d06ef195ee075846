#include "nilm/tensor_ops.hpp"

#include <string>

namespace nilm {

namespace {

std::string shapeOf(const Mat& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void checkConvShapes(const ConvParams& p) {
    if (p.inChannels < 1 || p.kernelSize < 1 || p.weight.cols() < 1) {
        throw ShapeError("conv params: extents must be positive, got inChannels=" +
                         std::to_string(p.inChannels) + " kernelSize=" + std::to_string(p.kernelSize) +
                         " outChannels=" + std::to_string(p.weight.cols()));
    }
    if (p.weight.rows() != p.inChannels * p.kernelSize || p.bias.size() != p.weight.cols()) {
        throw ShapeError("conv params: weight " + shapeOf(p.weight) + " and bias " +
                         std::to_string(p.bias.size()) + " inconsistent with inChannels=" +
                         std::to_string(p.inChannels) + " kernelSize=" + std::to_string(p.kernelSize));
    }
}

}  // namespace

ConvParams makeConvParams(Index inChannels, Index outChannels, Index kernelSize) {
    ConvParams p;
    p.weight = Mat::Zero(inChannels * kernelSize, outChannels);
    p.bias = Vec::Zero(outChannels);
    p.inChannels = inChannels;
    p.kernelSize = kernelSize;
    checkConvShapes(p);
    return p;
}

DenseParams makeDenseParams(Index inputs, Index outputs) {
    if (inputs < 1 || outputs < 1) {
        throw ShapeError("dense params: extents must be positive, got " + std::to_string(outputs) +
                         "x" + std::to_string(inputs));
    }
    return DenseParams{Mat::Zero(outputs, inputs), Vec::Zero(outputs)};
}

Mat im2colSame(const Mat& input, Index kernelSize) {
    if (kernelSize < 1) throw ShapeError("im2col: kernel size must be >= 1");
    if (input.cols() < 1) throw ShapeError("im2col: empty input");
    const Index channels = input.rows();
    const Index length = input.cols();
    const Index padLeft = convPadLeft(kernelSize);

    Mat padded = Mat::Zero(channels, length + kernelSize - 1);
    padded.middleCols(padLeft, length) = input;

    Mat patches(channels * kernelSize, length);
    for (Index j = 0; j < kernelSize; ++j) {
        patches.middleRows(j * channels, channels) = padded.middleCols(j, length);
    }
    return patches;
}

Mat col2imSame(const Mat& patchGrads, Index inChannels, Index kernelSize, Index length) {
    if (patchGrads.rows() != inChannels * kernelSize || patchGrads.cols() != length) {
        throw ShapeError("col2im: patch gradients " + shapeOf(patchGrads) + " do not match inChannels=" +
                         std::to_string(inChannels) + " kernelSize=" + std::to_string(kernelSize) +
                         " length=" + std::to_string(length));
    }
    const Index padLeft = convPadLeft(kernelSize);
    Mat padded = Mat::Zero(inChannels, length + kernelSize - 1);
    for (Index j = 0; j < kernelSize; ++j) {
        padded.middleCols(j, length) += patchGrads.middleRows(j * inChannels, inChannels);
    }
    return padded.middleCols(padLeft, length);
}

Mat convFromPatches(const Mat& patches, const ConvParams& params) {
    checkConvShapes(params);
    if (patches.rows() != params.weight.rows()) {
        throw ShapeError("conv: patch matrix " + shapeOf(patches) + " does not match filter bank " +
                         shapeOf(params.weight));
    }
    Mat out = params.weight.transpose() * patches;
    out.colwise() += params.bias;
    return out;
}

Mat conv1dSame(const Mat& input, const ConvParams& params) {
    checkConvShapes(params);
    if (input.rows() != params.inChannels) {
        throw ShapeError("conv: input has " + std::to_string(input.rows()) +
                         " channels, filter bank expects " + std::to_string(params.inChannels));
    }
    return convFromPatches(im2colSame(input, params.kernelSize), params);
}

ConvParams convParamGrads(const Mat& patches, const Mat& gradOut, const ConvParams& params) {
    checkConvShapes(params);
    if (gradOut.rows() != params.outChannels() || gradOut.cols() != patches.cols()) {
        throw ShapeError("conv backward: gradient " + shapeOf(gradOut) + " does not match output " +
                         std::to_string(params.outChannels()) + "x" + std::to_string(patches.cols()));
    }
    ConvParams g;
    g.weight = patches * gradOut.transpose();
    g.bias = gradOut.rowwise().sum();
    g.inChannels = params.inChannels;
    g.kernelSize = params.kernelSize;
    return g;
}

Mat convPatchGrads(const ConvParams& params, const Mat& gradOut) {
    checkConvShapes(params);
    if (gradOut.rows() != params.outChannels()) {
        throw ShapeError("conv backward: gradient has " + std::to_string(gradOut.rows()) +
                         " channels, filter bank produces " + std::to_string(params.outChannels()));
    }
    return params.weight * gradOut;
}

Conv1dGrads conv1dSameBackward(const Mat& input, const ConvParams& params, const Mat& gradOut) {
    if (input.rows() != params.inChannels) {
        throw ShapeError("conv backward: input has " + std::to_string(input.rows()) +
                         " channels, filter bank expects " + std::to_string(params.inChannels));
    }
    if (gradOut.cols() != input.cols()) {
        throw ShapeError("conv backward: gradient length " + std::to_string(gradOut.cols()) +
                         " does not match input length " + std::to_string(input.cols()));
    }
    const Mat patches = im2colSame(input, params.kernelSize);
    Conv1dGrads g;
    g.params = convParamGrads(patches, gradOut, params);
    g.input = col2imSame(convPatchGrads(params, gradOut), params.inChannels, params.kernelSize,
                         input.cols());
    return g;
}

MaxPool2 maxPool2(const Mat& input) {
    if (input.cols() % 2 != 0) {
        throw ShapeError("maxpool2: input length " + std::to_string(input.cols()) + " is odd");
    }
    const Index channels = input.rows();
    const Index half = input.cols() / 2;
    MaxPool2 r;
    r.output.resize(channels, half);
    r.argmax.resize(channels, half);
    for (Index t = 0; t < half; ++t) {
        for (Index c = 0; c < channels; ++c) {
            const Scalar a = input(c, 2 * t);
            const Scalar b = input(c, 2 * t + 1);
            if (a >= b) {  // ties go to the earlier column
                r.output(c, t) = a;
                r.argmax(c, t) = static_cast<int>(2 * t);
            } else {
                r.output(c, t) = b;
                r.argmax(c, t) = static_cast<int>(2 * t + 1);
            }
        }
    }
    return r;
}

Mat maxPool2Backward(const Eigen::ArrayXXi& argmax, const Mat& gradOut) {
    if (argmax.rows() != gradOut.rows() || argmax.cols() != gradOut.cols()) {
        throw ShapeError("maxpool2 backward: gradient " + shapeOf(gradOut) + " does not match argmax " +
                         std::to_string(argmax.rows()) + "x" + std::to_string(argmax.cols()));
    }
    Mat gradIn = Mat::Zero(gradOut.rows(), gradOut.cols() * 2);
    for (Index t = 0; t < gradOut.cols(); ++t) {
        for (Index c = 0; c < gradOut.rows(); ++c) {
            gradIn(c, argmax(c, t)) += gradOut(c, t);
        }
    }
    return gradIn;
}

Vec dense(const Vec& input, const DenseParams& params) {
    if (input.size() != params.weight.cols()) {
        throw ShapeError("dense: input length " + std::to_string(input.size()) +
                         " does not match weight " + shapeOf(params.weight));
    }
    return params.weight * input + params.bias;
}

DenseGrads denseBackward(const Vec& input, const DenseParams& params, const Vec& gradOut) {
    if (input.size() != params.weight.cols() || gradOut.size() != params.weight.rows()) {
        throw ShapeError("dense backward: input " + std::to_string(input.size()) + " / gradient " +
                         std::to_string(gradOut.size()) + " do not match weight " +
                         shapeOf(params.weight));
    }
    DenseGrads g;
    g.params.weight = gradOut * input.transpose();
    g.params.bias = gradOut;
    g.input = params.weight.transpose() * gradOut;
    return g;
}

Mat elementwiseMul(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError("elementwise mul: " + shapeOf(a) + " vs " + shapeOf(b));
    }
    return a.cwiseProduct(b);
}

std::pair<Mat, Mat> elementwiseMulBackward(const Mat& a, const Mat& b, const Mat& gradOut) {
    if (a.rows() != gradOut.rows() || a.cols() != gradOut.cols() || b.rows() != gradOut.rows() ||
        b.cols() != gradOut.cols()) {
        throw ShapeError("elementwise mul backward: gradient " + shapeOf(gradOut) +
                         " does not match inputs " + shapeOf(a) + ", " + shapeOf(b));
    }
    return {gradOut.cwiseProduct(b), gradOut.cwiseProduct(a)};
}

}  // namespace nilm
