#pragma once

#include "flowgen/flow/grid.hpp"
#include "flowgen/sim/vec2.hpp"

#include <span>
#include <vector>

namespace flowgen::sim {

enum class BoundsPolicy { wrap, reflect };

struct BoidsParams {
    double perception_radius = 40.0;
    double separation_radius = 12.0;
    double w_separation = 1.5;
    double w_alignment = 1.0;
    double w_cohesion = 1.0;
    double max_speed = 4.0;
    double max_force = 0.3;
};

struct Agent {
    Vec2 position;
    Vec2 velocity;

    friend bool operator==(const Agent&, const Agent&) = default;
};

struct BoidsState {
    std::vector<Agent> agents;
    BoidsParams params;
    double width = 512.0;
    double height = 512.0;
    BoundsPolicy bounds = BoundsPolicy::wrap;
};

struct AgentMotion {
    /// Position at the start of the step.
    Vec2 position;
    /// Distance travelled during the step (before wrapping).
    Vec2 displacement;
};

struct BoidsStepResult {
    BoidsState state;
    std::vector<AgentMotion> motions;
};

/// Synchronous Reynolds update; every agent reads the pre-step state.
///
/// For agent i, with offsets d_j = p_j - p_i (minimum image under wrap bounds):
///   neighbours N  = { j != i : |d_j| <  perception_radius }
///   crowding   S  = { j != i : 0 < |d_j| < separation_radius }
///   separation    = sum_{j in S} -d_j / |d_j|^2
///   alignment     = mean_{j in N} v_j - v_i        (0 if N is empty)
///   cohesion      = mean_{j in N} d_j              (0 if N is empty)
/// Each term is limited to max_force in magnitude, then
///   v' = limit(v_i + w_sep * sep + w_align * align + w_coh * coh, max_speed),
///   p' = p_i + v',
/// followed by the bounds policy (wrap: modulo; reflect: mirror position and
/// negate that velocity component). Sums over N and S run in ascending
/// (x, y, vx, vy) order of the other agents, which makes the update independent
/// of the order of the agent list.
BoidsStepResult boids_step(const BoidsState& state);

/// Scales `v` down to magnitude `max_magnitude` if it is longer.
Vec2 limit_magnitude(Vec2 v, double max_magnitude);

/// Writes each agent's displacement into the disk of `patch_radius` around its
/// position; overlapping disks average, uncovered pixels are zero.
FlowField rasterize_agent_flow(std::span<const AgentMotion> motions, double patch_radius, int width,
                               int height);

} // namespace flowgen::sim
