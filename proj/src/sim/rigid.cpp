#include "flowgen/sim/rigid.hpp"

#include "flowgen/error.hpp"

#include <algorithm>
#include <cmath>

namespace flowgen::sim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

RigidFlow translate_flow(const Translate& t, int width, int height) {
    return {FlowField::constant(width, height, FlowConvention::forward, t.dx, t.dy), Mask(width, height)};
}

RigidFlow sphere_flow(const SphereRotation& s, int width, int height) {
    if (!(s.radius > 0.0)) throw ValidationError("sphere_rotation: radius must be positive");
    const auto& a = s.axis;
    const double axis_norm = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    if (std::abs(axis_norm - 1.0) > 1e-9) {
        throw ValidationError("sphere_rotation: axis must be a unit vector");
    }
    const double nearest_x = std::clamp(s.center.x, 0.0, static_cast<double>(width - 1));
    const double nearest_y = std::clamp(s.center.y, 0.0, static_cast<double>(height - 1));
    if (std::hypot(nearest_x - s.center.x, nearest_y - s.center.y) >= s.radius) {
        throw ValidationError("sphere_rotation: the sphere's disk does not intersect the image");
    }

    const double c = std::cos(s.angle);
    const double sn = std::sin(s.angle);
    const double r2 = s.radius * s.radius;
    FlowField flow(width, height, FlowConvention::forward);
    Mask occlusion(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double px = x - s.center.x;
            const double py = y - s.center.y;
            const double rho2 = px * px + py * py;
            if (rho2 > r2) continue;
            const double pz = std::sqrt(r2 - rho2);
            // Rodrigues: p' = p cos + (a x p) sin + a (a . p)(1 - cos)
            const double cross_x = a[1] * pz - a[2] * py;
            const double cross_y = a[2] * px - a[0] * pz;
            const double cross_z = a[0] * py - a[1] * px;
            const double along = (a[0] * px + a[1] * py + a[2] * pz) * (1.0 - c);
            const double qx = px * c + cross_x * sn + a[0] * along;
            const double qy = py * c + cross_y * sn + a[1] * along;
            const double qz = pz * c + cross_z * sn + a[2] * along;
            flow.set(x, y, qx - px, qy - py);
            if (qz < 0.0) occlusion.set(x, y, true);
        }
    }
    return {std::move(flow), std::move(occlusion)};
}

RigidFlow radial_flow(const RadialGrowth& g, int width, int height) {
    const bool whole_image = g.mask.width() == 0 && g.mask.height() == 0;
    if (!whole_image && (g.mask.width() != width || g.mask.height() != height)) {
        throw ValidationError("radial_growth: mask size does not match the canvas");
    }
    FlowField flow(width, height, FlowConvention::forward);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (!whole_image && !g.mask.at(x, y)) continue;
            const double dx = x - g.center.x;
            const double dy = y - g.center.y;
            const double r = std::hypot(dx, dy);
            if (r == 0.0) continue;
            flow.set(x, y, g.rate * dx / r, g.rate * dy / r);
        }
    }
    return {std::move(flow), Mask(width, height)};
}

} // namespace

RigidFlow rigid_flow(const RigidMotionSpec& spec, int width, int height) {
    if (width <= 0 || height <= 0) throw ValidationError("rigid_flow: canvas must be non-empty");
    return std::visit(overloaded{
                          [&](const Translate& t) { return translate_flow(t, width, height); },
                          [&](const SphereRotation& s) { return sphere_flow(s, width, height); },
                          [&](const RadialGrowth& g) { return radial_flow(g, width, height); },
                      },
                      spec);
}

} // namespace flowgen::sim
