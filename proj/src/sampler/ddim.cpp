#include "flowgen/sampler/ddim.hpp"

#include "flowgen/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace flowgen {

namespace {

void check_steps(const NoiseSchedule& schedule, int t_from, int t_to, const char* op) {
    if (schedule.step_position(t_from) < 0 || schedule.step_position(t_to) < 0) {
        throw ValidationError(std::string(op) + ": timesteps must be schedule step indices");
    }
}

void check_pair(const TensorGrid& z, const TensorGrid& eps_hat, const char* op) {
    if (!z.same_shape(eps_hat)) throw ValidationError(std::string(op) + ": latent and eps_hat differ in shape");
}

} // namespace

double ddim_sigma(double alpha_bar_from, double alpha_bar_to, double eta) {
    return eta * std::sqrt((1.0 - alpha_bar_to) / (1.0 - alpha_bar_from)) *
           std::sqrt(1.0 - alpha_bar_from / alpha_bar_to);
}

StepResult ddim_step(const TensorGrid& z, const TensorGrid& eps_hat, int t_from, int t_to,
                     const EtaMap& eta, const CounterRng& rng, const NoiseSchedule& schedule) {
    if (!(t_from > t_to)) throw ValidationError("ddim_step: need t_from > t_to");
    check_steps(schedule, t_from, t_to, "ddim_step");
    check_pair(z, eps_hat, "ddim_step");
    if (eta.width() != z.width() || eta.height() != z.height()) {
        throw ValidationError("ddim_step: eta map does not match the latent size");
    }

    const double a_from = schedule.alpha_bar(t_from);
    const double a_to = schedule.alpha_bar(t_to);
    const double sqrt_from = std::sqrt(a_from);
    const double sqrt_to = std::sqrt(a_to);
    const double noise_from = std::sqrt(1.0 - a_from);

    StepResult out{TensorGrid(z.width(), z.height(), z.channels()), false};
    const auto zin = z.data();
    const auto eps = eps_hat.data();
    auto dst = out.latent.data();
    const auto etas = eta.values();
    const int channels = z.channels();
    for (std::size_t p = 0; p < etas.size(); ++p) {
        const double sigma = ddim_sigma(a_from, a_to, etas[p]);
        double dir2 = 1.0 - a_to - sigma * sigma;
        if (dir2 < 0.0) {
            dir2 = 0.0;
            out.clamped = true;
        }
        const double dir = std::sqrt(dir2);
        for (int c = 0; c < channels; ++c) {
            const std::size_t k = p * channels + c;
            const double x0 = (zin[k] - noise_from * eps[k]) / sqrt_from;
            double value = sqrt_to * x0 + dir * eps[k];
            if (sigma != 0.0) value += sigma * rng.normal(k);
            dst[k] = value;
        }
    }
    return out;
}

StepResult ddim_step(const TensorGrid& z, const TensorGrid& eps_hat, int t_from, int t_to, double eta,
                     const CounterRng& rng, const NoiseSchedule& schedule) {
    return ddim_step(z, eps_hat, t_from, t_to, EtaMap::uniform(z.width(), z.height(), eta), rng, schedule);
}

TensorGrid ddim_inversion_step(const TensorGrid& z, const TensorGrid& eps_hat, int t_from, int t_to,
                               const NoiseSchedule& schedule) {
    if (!(t_to > t_from)) throw ValidationError("ddim_inversion_step: need t_to > t_from");
    check_steps(schedule, t_from, t_to, "ddim_inversion_step");
    check_pair(z, eps_hat, "ddim_inversion_step");

    const double a_from = schedule.alpha_bar(t_from);
    const double a_to = schedule.alpha_bar(t_to);
    const double sqrt_from = std::sqrt(a_from);
    const double sqrt_to = std::sqrt(a_to);
    const double noise_from = std::sqrt(1.0 - a_from);
    const double noise_to = std::sqrt(1.0 - a_to);

    TensorGrid out(z.width(), z.height(), z.channels());
    const auto zin = z.data();
    const auto eps = eps_hat.data();
    auto dst = out.data();
    for (std::size_t k = 0; k < dst.size(); ++k) {
        const double x0 = (zin[k] - noise_from * eps[k]) / sqrt_from;
        dst[k] = sqrt_to * x0 + noise_to * eps[k];
    }
    return out;
}

TensorGrid cfg_combine(const TensorGrid& eps_cond, const TensorGrid& eps_uncond, double gamma) {
    if (!eps_cond.same_shape(eps_uncond)) throw ValidationError("cfg_combine: shapes differ");
    if (!std::isfinite(gamma)) throw ValidationError("cfg_combine: gamma must be finite");
    TensorGrid out(eps_cond.width(), eps_cond.height(), eps_cond.channels());
    const auto c = eps_cond.data();
    const auto u = eps_uncond.data();
    auto dst = out.data();
    // u + (c - u) can round away from c, so gamma == 1 is taken literally.
    if (gamma == 1.0) {
        std::copy(c.begin(), c.end(), dst.begin());
        return out;
    }
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = u[k] + gamma * (c[k] - u[k]);
    return out;
}

TensorGrid noise_latent(const TensorGrid& z0, int t, const CounterRng& rng, const NoiseSchedule& schedule) {
    const double a = schedule.alpha_bar(t);
    const double sa = std::sqrt(a);
    const double sn = std::sqrt(1.0 - a);
    TensorGrid out(z0.width(), z0.height(), z0.channels());
    const auto src = z0.data();
    auto dst = out.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = sa * src[k] + sn * rng.normal(k);
    return out;
}

} // namespace flowgen
