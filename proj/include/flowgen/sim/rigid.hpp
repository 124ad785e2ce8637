#pragma once

#include "flowgen/flow/grid.hpp"
#include "flowgen/sim/vec2.hpp"

#include <array>
#include <variant>

namespace flowgen::sim {

struct Translate {
    double dx = 0.0;
    double dy = 0.0;
};

/// Sphere seen under orthographic projection; image x right, y down, z toward
/// the viewer. The axis passes through the sphere centre.
struct SphereRotation {
    Vec2 center;
    double radius = 1.0;
    std::array<double, 3> axis{0.0, 1.0, 0.0};
    /// Rotation per frame in radians (right-handed about `axis`).
    double angle = 0.0;
};

/// Constant-speed outward flow from `center`, restricted to `mask`
/// (an empty mask means the whole image).
struct RadialGrowth {
    Vec2 center;
    double rate = 1.0;
    Mask mask;
};

using RigidMotionSpec = std::variant<Translate, SphereRotation, RadialGrowth>;

struct RigidFlow {
    FlowField flow;
    /// Pixels whose surface point rotates onto the far hemisphere this frame.
    Mask occlusion;
};

/// Forward flow for one frame of a rigid motion.
///
/// For the sphere, each pixel inside the projected disk is lifted to the front
/// hemisphere (z = sqrt(R^2 - dx^2 - dy^2)), rotated, and projected back; its
/// flow is the projected displacement. Points that end up behind the sphere
/// keep that displacement (which points toward where they leave the visible
/// disk) and are flagged in `occlusion`. Pixels outside the disk get zero.
/// Throws ValidationError for a non-positive radius, a non-unit axis, a disk
/// that misses the image, or a growth mask of the wrong size.
RigidFlow rigid_flow(const RigidMotionSpec& spec, int width, int height);

} // namespace flowgen::sim
