#include "flowgen/sim/boids.hpp"

#include "flowgen/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace flowgen::sim {

namespace {

void validate(const BoidsState& state) {
    const BoidsParams& p = state.params;
    if (!(state.width > 0.0) || !(state.height > 0.0)) {
        throw ValidationError("boids: bounds must be positive");
    }
    if (!(p.perception_radius > 0.0) || !(p.separation_radius > 0.0) || !(p.max_speed > 0.0) ||
        !(p.max_force > 0.0)) {
        throw ValidationError("boids: radii, max_speed and max_force must be positive");
    }
    for (const Agent& a : state.agents) {
        if (!std::isfinite(a.position.x) || !std::isfinite(a.position.y) ||
            !std::isfinite(a.velocity.x) || !std::isfinite(a.velocity.y)) {
            throw ValidationError("boids: agent state must be finite");
        }
    }
}

double min_image(double d, double extent) {
    if (d > 0.5 * extent) return d - extent;
    if (d < -0.5 * extent) return d + extent;
    return d;
}

void wrap_axis(double& p, double extent) {
    p -= extent * std::floor(p / extent);
    if (p >= extent) p = 0.0;
}

void reflect_axis(double& p, double& v, double extent) {
    if (p < 0.0) {
        p = -p;
        v = -v;
    } else if (p > extent) {
        p = 2.0 * extent - p;
        v = -v;
    }
    p = std::clamp(p, 0.0, extent);
}

} // namespace

Vec2 limit_magnitude(Vec2 v, double max_magnitude) {
    const double m = std::hypot(v.x, v.y);
    if (m <= max_magnitude) return v;
    const double scale = max_magnitude / m;
    return {v.x * scale, v.y * scale};
}

BoidsStepResult boids_step(const BoidsState& state) {
    validate(state);
    const auto& agents = state.agents;
    const BoidsParams& prm = state.params;
    const bool wrap = state.bounds == BoundsPolicy::wrap;
    const std::size_t n = agents.size();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const Agent& p = agents[a];
        const Agent& q = agents[b];
        return std::tie(p.position.x, p.position.y, p.velocity.x, p.velocity.y) <
               std::tie(q.position.x, q.position.y, q.velocity.x, q.velocity.y);
    });

    BoidsStepResult result;
    result.state = state;
    result.motions.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Agent& self = agents[i];
        Vec2 separation, velocity_sum, offset_sum;
        std::size_t neighbours = 0;
        for (std::size_t j : order) {
            if (j == i) continue;
            double dx = agents[j].position.x - self.position.x;
            double dy = agents[j].position.y - self.position.y;
            if (wrap) {
                dx = min_image(dx, state.width);
                dy = min_image(dy, state.height);
            }
            const double dist = std::hypot(dx, dy);
            if (dist < prm.perception_radius) {
                velocity_sum.x += agents[j].velocity.x;
                velocity_sum.y += agents[j].velocity.y;
                offset_sum.x += dx;
                offset_sum.y += dy;
                ++neighbours;
            }
            if (dist > 0.0 && dist < prm.separation_radius) {
                const double inv_sq = 1.0 / (dist * dist);
                separation.x -= dx * inv_sq;
                separation.y -= dy * inv_sq;
            }
        }
        Vec2 alignment, cohesion;
        if (neighbours > 0) {
            const double count = static_cast<double>(neighbours);
            alignment = {velocity_sum.x / count - self.velocity.x, velocity_sum.y / count - self.velocity.y};
            cohesion = {offset_sum.x / count, offset_sum.y / count};
        }
        separation = limit_magnitude(separation, prm.max_force);
        alignment = limit_magnitude(alignment, prm.max_force);
        cohesion = limit_magnitude(cohesion, prm.max_force);

        const Vec2 steering{
            prm.w_separation * separation.x + prm.w_alignment * alignment.x + prm.w_cohesion * cohesion.x,
            prm.w_separation * separation.y + prm.w_alignment * alignment.y + prm.w_cohesion * cohesion.y};
        Vec2 velocity = limit_magnitude({self.velocity.x + steering.x, self.velocity.y + steering.y},
                                        prm.max_speed);
        Vec2 position{self.position.x + velocity.x, self.position.y + velocity.y};
        result.motions[i] = {self.position, velocity};
        if (wrap) {
            wrap_axis(position.x, state.width);
            wrap_axis(position.y, state.height);
        } else {
            reflect_axis(position.x, velocity.x, state.width);
            reflect_axis(position.y, velocity.y, state.height);
        }
        result.state.agents[i] = {position, velocity};
    }
    return result;
}

FlowField rasterize_agent_flow(std::span<const AgentMotion> motions, double patch_radius, int width,
                               int height) {
    if (!(patch_radius >= 1.0)) throw ValidationError("rasterize_agent_flow: patch_radius must be >= 1");
    const std::size_t n = static_cast<std::size_t>(width) * height;
    std::vector<double> su(n, 0.0), sv(n, 0.0);
    std::vector<int> count(n, 0);
    const double r2 = patch_radius * patch_radius;
    for (const AgentMotion& m : motions) {
        const int x_lo = std::max(0, static_cast<int>(std::floor(m.position.x - patch_radius)));
        const int x_hi = std::min(width - 1, static_cast<int>(std::ceil(m.position.x + patch_radius)));
        const int y_lo = std::max(0, static_cast<int>(std::floor(m.position.y - patch_radius)));
        const int y_hi = std::min(height - 1, static_cast<int>(std::ceil(m.position.y + patch_radius)));
        for (int y = y_lo; y <= y_hi; ++y) {
            for (int x = x_lo; x <= x_hi; ++x) {
                const double dx = x - m.position.x;
                const double dy = y - m.position.y;
                if (dx * dx + dy * dy > r2) continue;
                const std::size_t k = static_cast<std::size_t>(y) * width + x;
                su[k] += m.displacement.x;
                sv[k] += m.displacement.y;
                ++count[k];
            }
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (count[k] > 0) {
            su[k] /= count[k];
            sv[k] /= count[k];
        }
    }
    return FlowField(width, height, FlowConvention::forward, std::move(su), std::move(sv));
}

} // namespace flowgen::sim
