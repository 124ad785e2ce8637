#pragma once

#include "flowgen/flow/grid.hpp"
#include "flowgen/metrics/flow_estimator.hpp"
#include "flowgen/metrics/ssim.hpp"

#include <utility>
#include <vector>

namespace flowgen {

struct MotionConsistencyReport {
    /// SSIM(frame f, frame f+1 registered onto frame f) for each pair.
    std::vector<double> per_pair;
    double mean = 0.0;
};

/// Estimates the flow of each consecutive pair, warps frame f+1 back onto frame f
/// and scores the registration with SSIM. Throws ValidationError for fewer than
/// two frames.
MotionConsistencyReport motion_consistency_report(const std::vector<TensorGrid>& frames,
                                                  const FlowEstimator& estimator);
double motion_consistency(const std::vector<TensorGrid>& frames, const FlowEstimatorParams& params = {});

using GridPair = std::pair<TensorGrid, TensorGrid>;

struct CorrelationReport {
    std::vector<double> per_pair;
    /// False where no pixel had both flows non-zero.
    std::vector<bool> defined;
    /// Mean over defined pairs, in pair order; 0 when none are defined.
    double mean = 0.0;
    /// Per-pixel cosine at latent resolution.
    std::vector<TensorGrid> heat_maps;
};

/// Estimates flow in image space and in latent space, resamples the image-space
/// flow to the latent grid and reports the cosine correlation of the two fields.
/// Image sizes must be an integer multiple (same in x and y) of the latent size.
CorrelationReport correlation_experiment(const std::vector<GridPair>& image_pairs,
                                         const std::vector<GridPair>& latent_pairs,
                                         const FlowEstimator& estimator);

} // namespace flowgen
