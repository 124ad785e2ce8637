#pragma once

#include "flowgen/flow/grid.hpp"

namespace flowgen {

struct FlowEstimatorParams {
    int levels = 4;
    /// SOR sweeps per pyramid level, split evenly across the warps.
    int iterations = 100;
    /// Weight of |grad u|^2 + |grad v|^2, in units of the level's mean squared
    /// image gradient.
    double smoothness = 0.5;
    /// Re-linearisations per level.
    int warps = 5;
    double presmooth_sigma = 0.8;
};

struct FlowEstimate {
    /// Backward flow: warp_backward(b, flow) approximates a.
    FlowField flow;
    /// Set when the images carry no usable gradient; `flow` is then zero.
    bool low_confidence = false;
};

/// Dense motion estimator between two frames of equal size.
class FlowEstimator {
public:
    virtual ~FlowEstimator() = default;
    virtual FlowEstimate estimate(const TensorGrid& a, const TensorGrid& b) const = 0;
};

/// Coarse-to-fine Horn-Schunck with image warping and SOR sweeps. Colour input is
/// converted with 0.299 R + 0.587 G + 0.114 B; values are clamped to [0, 1].
class HornSchunckEstimator final : public FlowEstimator {
public:
    explicit HornSchunckEstimator(FlowEstimatorParams params = {});
    FlowEstimate estimate(const TensorGrid& a, const TensorGrid& b) const override;

private:
    FlowEstimatorParams params_;
};

/// Throws ValidationError for images smaller than 16x16 or of different shape.
FlowEstimate estimate_flow(const TensorGrid& a, const TensorGrid& b, const FlowEstimatorParams& params = {});

/// Single-channel luminance in [0, 1]; accepts 1, 3 or 4 channels.
TensorGrid to_gray(const TensorGrid& image);

} // namespace flowgen
