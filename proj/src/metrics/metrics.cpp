#include "flowgen/metrics/metrics.hpp"

#include "flowgen/error.hpp"
#include "flowgen/flow/flow_ops.hpp"

#include <algorithm>

namespace flowgen {

MotionConsistencyReport motion_consistency_report(const std::vector<TensorGrid>& frames,
                                                  const FlowEstimator& estimator) {
    if (frames.size() < 2) throw ValidationError("motion_consistency: need at least two frames");
    MotionConsistencyReport report;
    for (std::size_t f = 0; f + 1 < frames.size(); ++f) {
        const FlowEstimate est = estimator.estimate(frames[f], frames[f + 1]);
        const TensorGrid registered = warp_backward(frames[f + 1], est.flow);
        report.per_pair.push_back(ssim(frames[f], registered));
    }
    double sum = 0.0;
    for (double v : report.per_pair) sum += v;
    report.mean = sum / static_cast<double>(report.per_pair.size());
    return report;
}

double motion_consistency(const std::vector<TensorGrid>& frames, const FlowEstimatorParams& params) {
    return motion_consistency_report(frames, HornSchunckEstimator(params)).mean;
}

CorrelationReport correlation_experiment(const std::vector<GridPair>& image_pairs,
                                         const std::vector<GridPair>& latent_pairs,
                                         const FlowEstimator& estimator) {
    if (image_pairs.size() != latent_pairs.size()) {
        throw ValidationError("correlation_experiment: image and latent pair counts differ");
    }
    CorrelationReport report;
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t i = 0; i < image_pairs.size(); ++i) {
        const auto& [ia, ib] = image_pairs[i];
        const auto& [la, lb] = latent_pairs[i];
        if (la.width() == 0 || ia.width() % la.width() != 0 || ia.height() % la.height() != 0 ||
            ia.width() / la.width() != ia.height() / la.height()) {
            throw ValidationError("correlation_experiment: image size is not an integer multiple of the latent size");
        }
        const int factor = ia.width() / la.width();
        const FlowField image_flow = resample_flow(estimator.estimate(ia, ib).flow, factor);
        const FlowField latent_flow = estimator.estimate(la, lb).flow;
        const FlowCorrelation corr = flow_cosine_correlation(image_flow, latent_flow);
        const double value = std::clamp(corr.value, -1.0, 1.0);
        report.per_pair.push_back(value);
        report.defined.push_back(corr.defined);
        report.heat_maps.push_back(flow_cosine_map(image_flow, latent_flow));
        if (corr.defined) {
            sum += value;
            ++defined;
        }
    }
    report.mean = defined > 0 ? sum / static_cast<double>(defined) : 0.0;
    return report;
}

} // namespace flowgen
