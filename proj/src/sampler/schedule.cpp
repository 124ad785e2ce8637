#include "flowgen/sampler/schedule.hpp"

#include "flowgen/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace flowgen {

int NoiseSchedule::step_position(int t) const {
    const auto it = std::lower_bound(steps_.begin(), steps_.end(), t);
    if (it == steps_.end() || *it != t) return -1;
    return static_cast<int>(it - steps_.begin());
}

std::vector<int> NoiseSchedule::steps_to_tau() const {
    std::vector<int> out;
    for (int t : steps_) {
        if (t > tau_) break;
        out.push_back(t);
    }
    return out;
}

NoiseSchedule make_schedule(const ScheduleConfig& cfg) {
    if (!(cfg.beta_start > 0.0 && cfg.beta_start < cfg.beta_end && cfg.beta_end < 1.0)) {
        throw ValidationError("make_schedule: need 0 < beta_start < beta_end < 1");
    }
    if (cfg.train_steps < 2) throw ValidationError("make_schedule: train_steps must be >= 2");
    if (cfg.inference_steps < 1 || cfg.inference_steps > cfg.train_steps) {
        throw ValidationError("make_schedule: inference_steps must lie in [1, train_steps]");
    }
    if (cfg.tau < 0 || cfg.tau >= cfg.train_steps) {
        throw ValidationError("make_schedule: tau must lie in [0, train_steps)");
    }

    NoiseSchedule s;
    const int n = cfg.train_steps;
    s.beta_.resize(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
        const double frac = static_cast<double>(t) / (n - 1);
        if (cfg.spacing == BetaSpacing::linear) {
            s.beta_[t] = cfg.beta_start + (cfg.beta_end - cfg.beta_start) * frac;
        } else {
            const double r = std::sqrt(cfg.beta_start) +
                             (std::sqrt(cfg.beta_end) - std::sqrt(cfg.beta_start)) * frac;
            s.beta_[t] = r * r;
        }
    }
    s.alpha_bar_.resize(s.beta_.size());
    double product = 1.0;
    for (std::size_t t = 0; t < s.beta_.size(); ++t) {
        product *= 1.0 - s.beta_[t];
        s.alpha_bar_[t] = product;
    }

    const int stride = n / cfg.inference_steps;
    for (int k = 0; k < cfg.inference_steps; ++k) s.steps_.push_back(k * stride);

    const auto it = std::upper_bound(s.steps_.begin(), s.steps_.end(), cfg.tau);
    s.tau_ = *std::prev(it); // steps_ starts at 0 <= tau
    return s;
}

} // namespace flowgen
