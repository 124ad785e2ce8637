#pragma once

#include "flowgen/flow/grid.hpp"

namespace flowgen {

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Mean local SSIM over every full window position (no padding), averaged over
/// channels. Inputs are clamped to [0, 1]. Throws ValidationError when the
/// shapes differ or the image is smaller than the window.
double ssim(const TensorGrid& a, const TensorGrid& b, const SsimParams& params = {});

/// Per-position SSIM of one channel, (W - window + 1) x (H - window + 1).
TensorGrid ssim_map(const TensorGrid& a, const TensorGrid& b, int channel, const SsimParams& params = {});

} // namespace flowgen
