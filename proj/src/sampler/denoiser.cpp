#include "flowgen/sampler/denoiser.hpp"

#include "flowgen/error.hpp"

#include <cmath>

namespace flowgen {

AnalyticGaussianDenoiser::AnalyticGaussianDenoiser(NoiseSchedule schedule, TensorGrid mu, double s,
                                                   double negative_shift)
    : schedule_(std::move(schedule)), mu_(std::move(mu)), s_(s), negative_shift_(negative_shift) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("analytic denoiser: s must be positive");
    if (!std::isfinite(negative_shift)) throw ValidationError("analytic denoiser: shift must be finite");
    if (mu_.empty() || !mu_.all_finite()) throw ValidationError("analytic denoiser: mu must be finite");
}

TensorGrid AnalyticGaussianDenoiser::predict_with_shift(const TensorGrid& z, int t, double shift,
                                                        bool want_mean) const {
    if (!z.same_shape(mu_)) throw ValidationError("analytic denoiser: latent shape differs from mu");
    const double a = schedule_.alpha_bar(t);
    const double sa = std::sqrt(a);
    const double s2 = s_ * s_;
    const double gain = sa * s2 / (a * s2 + 1.0 - a);
    const double inv_noise = 1.0 / std::sqrt(1.0 - a);

    TensorGrid out(z.width(), z.height(), z.channels());
    const auto x = z.data();
    const auto m = mu_.data();
    auto dst = out.data();
    for (std::size_t k = 0; k < dst.size(); ++k) {
        const double mean = m[k] + shift;
        const double x0 = mean + gain * (x[k] - sa * mean);
        dst[k] = want_mean ? x0 : (x[k] - sa * x0) * inv_noise;
    }
    return out;
}

TensorGrid AnalyticGaussianDenoiser::predict(const TensorGrid& z, int t, const Conditioning&,
                                             PromptBranch branch, const AttendList&) const {
    return predict_with_shift(z, t, branch == PromptBranch::negative ? negative_shift_ : 0.0, false);
}

TensorGrid AnalyticGaussianDenoiser::posterior_mean(const TensorGrid& z, int t) const {
    return predict_with_shift(z, t, 0.0, true);
}

} // namespace flowgen
