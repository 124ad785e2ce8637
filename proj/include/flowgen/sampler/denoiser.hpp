#pragma once

#include "flowgen/flow/grid.hpp"
#include "flowgen/sampler/schedule.hpp"

#include <string>
#include <vector>

namespace flowgen {

/// Opaque to the sampler: only the denoiser interprets it.
struct Conditioning {
    std::string prompt;
    std::string negative_prompt;
};

enum class PromptBranch { positive, negative };

/// Latents the current frame attends to, in order.
using AttendList = std::vector<const TensorGrid*>;

/// Noise predictor eps(z, conditioning; attend list). Implementations must be
/// deterministic and return a grid shaped like `z`.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual TensorGrid predict(const TensorGrid& z, int t, const Conditioning& conditioning,
                               PromptBranch branch, const AttendList& attend) const = 0;
};

/// Exact minimum-MSE noise prediction for data distributed as N(mu, s^2 I).
/// The negative branch uses mu + negative_shift, which lets CFG be exercised
/// with a known answer. The attend list is ignored.
class AnalyticGaussianDenoiser final : public Denoiser {
public:
    AnalyticGaussianDenoiser(NoiseSchedule schedule, TensorGrid mu, double s, double negative_shift = 0.0);

    TensorGrid predict(const TensorGrid& z, int t, const Conditioning& conditioning, PromptBranch branch,
                       const AttendList& attend) const override;

    /// E[x0 | x_t] for the positive branch.
    TensorGrid posterior_mean(const TensorGrid& z, int t) const;

    const TensorGrid& mu() const { return mu_; }
    double s() const { return s_; }

private:
    TensorGrid predict_with_shift(const TensorGrid& z, int t, double shift, bool want_mean) const;

    NoiseSchedule schedule_;
    TensorGrid mu_;
    double s_;
    double negative_shift_;
};

/// Maps frames to latents and back.
class Codec {
public:
    virtual ~Codec() = default;
    virtual TensorGrid encode(const TensorGrid& frame) const = 0;
    virtual TensorGrid decode(const TensorGrid& latent) const = 0;
};

class IdentityCodec final : public Codec {
public:
    TensorGrid encode(const TensorGrid& frame) const override { return frame; }
    TensorGrid decode(const TensorGrid& latent) const override { return latent; }
};

} // namespace flowgen
