#pragma once

#include "flowgen/flow/grid.hpp"
#include "flowgen/sampler/rng.hpp"
#include "flowgen/sampler/schedule.hpp"

namespace flowgen {

struct StepResult {
    TensorGrid latent;
    /// Set when 1 - alpha_bar_to - sigma^2 went negative and was clamped to 0.
    bool clamped = false;
};

/// sigma for one reverse step at blend factor eta:
/// eta * sqrt((1 - a_to) / (1 - a_from)) * sqrt(1 - a_from / a_to).
double ddim_sigma(double alpha_bar_from, double alpha_bar_to, double eta);

/// One reverse step t_from -> t_to (t_from > t_to, both in the schedule's step
/// indices). eta is read per pixel; noise for element k is rng.normal(k), so the
/// result does not depend on evaluation order. Noise is not drawn where sigma is 0.
StepResult ddim_step(const TensorGrid& z, const TensorGrid& eps_hat, int t_from, int t_to,
                     const EtaMap& eta, const CounterRng& rng, const NoiseSchedule& schedule);

/// Scalar eta; identical to passing EtaMap::uniform(..., eta).
StepResult ddim_step(const TensorGrid& z, const TensorGrid& eps_hat, int t_from, int t_to, double eta,
                     const CounterRng& rng, const NoiseSchedule& schedule);

/// Deterministic forward step t_from -> t_to (t_to > t_from); the exact inverse of
/// ddim_step at eta = 0 for the same eps_hat.
TensorGrid ddim_inversion_step(const TensorGrid& z, const TensorGrid& eps_hat, int t_from, int t_to,
                               const NoiseSchedule& schedule);

/// eps_uncond + gamma * (eps_cond - eps_uncond).
TensorGrid cfg_combine(const TensorGrid& eps_cond, const TensorGrid& eps_uncond, double gamma);

/// Closed-form forward noising: sqrt(a_t) * z0 + sqrt(1 - a_t) * xi, with
/// xi[k] = rng.normal(k).
TensorGrid noise_latent(const TensorGrid& z0, int t, const CounterRng& rng, const NoiseSchedule& schedule);

} // namespace flowgen
