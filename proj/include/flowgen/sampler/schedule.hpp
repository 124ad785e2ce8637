#pragma once

#include <span>
#include <vector>

namespace flowgen {

enum class BetaSpacing {
    linear,
    /// beta interpolated linearly in sqrt space ("scaled linear").
    sqrt_space,
};

struct ScheduleConfig {
    int train_steps = 1000;
    double beta_start = 8.5e-4;
    double beta_end = 1.2e-2;
    BetaSpacing spacing = BetaSpacing::sqrt_space;
    int inference_steps = 200;
    int tau = 400;
};

/// Cumulative noise schedule plus the timestep subset used at inference.
/// The clean latent of a frame sits at step_indices().front().
class NoiseSchedule {
public:
    int train_steps() const { return static_cast<int>(alpha_bar_.size()); }
    double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }
    double beta(int t) const { return beta_.at(static_cast<std::size_t>(t)); }
    std::span<const double> alpha_bars() const { return alpha_bar_; }
    std::span<const int> step_indices() const { return steps_; }
    /// Inversion depth, always one of step_indices().
    int tau() const { return tau_; }
    /// Position of `t` within step_indices(), or -1.
    int step_position(int t) const;

    /// step_indices() from the first index up to and including tau, ascending.
    std::vector<int> steps_to_tau() const;

private:
    friend NoiseSchedule make_schedule(const ScheduleConfig& config);

    std::vector<double> beta_;
    std::vector<double> alpha_bar_;
    std::vector<int> steps_;
    int tau_ = 0;
};

/// Builds beta_t per `spacing`, alpha_bar_t = prod_{s <= t} (1 - beta_s), and
/// `inference_steps` indices spaced by train_steps / inference_steps starting at 0.
/// tau is snapped down to the nearest step index. Throws ValidationError unless
/// 0 < beta_start < beta_end < 1, 1 <= inference_steps <= train_steps and
/// 0 <= tau < train_steps.
NoiseSchedule make_schedule(const ScheduleConfig& config);

} // namespace flowgen
