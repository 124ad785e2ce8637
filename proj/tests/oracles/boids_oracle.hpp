#pragma once

// Rule-by-rule reference flock. Each rule is its own pass over the neighbours;
// the library fuses them into one loop. Neighbour sums visit agents sorted by
// (x, y, vx, vy) so the floating-point results are comparable bit for bit.

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

struct Boid {
    double x, y, vx, vy;
};

struct FlockRules {
    double perception, separation;
    double w_sep, w_align, w_coh;
    double max_speed, max_force;
    double width, height;
};

inline void clip(double& x, double& y, double cap) {
    const double m = std::hypot(x, y);
    if (m > cap) {
        const double k = cap / m;
        x *= k;
        y *= k;
    }
}

inline double wrap_delta(double d, double extent) {
    if (d > extent / 2) return d - extent;
    if (d < -extent / 2) return d + extent;
    return d;
}

inline double wrap_coord(double p, double extent) {
    double r = p - extent * std::floor(p / extent);
    return r >= extent ? 0.0 : r;
}

inline std::vector<Boid> step_wrapped(const std::vector<Boid>& flock, const FlockRules& r) {
    std::vector<Boid> sorted = flock;
    std::sort(sorted.begin(), sorted.end(), [](const Boid& a, const Boid& b) {
        if (a.x != b.x) return a.x < b.x;
        if (a.y != b.y) return a.y < b.y;
        if (a.vx != b.vx) return a.vx < b.vx;
        return a.vy < b.vy;
    });

    std::vector<Boid> next;
    for (const Boid& me : flock) {
        bool skipped_self = false;
        auto others = [&](auto&& visit) {
            skipped_self = false;
            for (const Boid& o : sorted) {
                if (!skipped_self && o.x == me.x && o.y == me.y && o.vx == me.vx && o.vy == me.vy) {
                    skipped_self = true;
                    continue;
                }
                const double dx = wrap_delta(o.x - me.x, r.width);
                const double dy = wrap_delta(o.y - me.y, r.height);
                visit(o, dx, dy, std::hypot(dx, dy));
            }
        };

        // separation
        double sx = 0, sy = 0;
        others([&](const Boid&, double dx, double dy, double d) {
            if (d > 0 && d < r.separation) {
                sx -= dx * (1.0 / (d * d));
                sy -= dy * (1.0 / (d * d));
            }
        });
        // alignment
        double vx = 0, vy = 0;
        int n = 0;
        others([&](const Boid& o, double, double, double d) {
            if (d < r.perception) {
                vx += o.vx;
                vy += o.vy;
                ++n;
            }
        });
        double ax = 0, ay = 0;
        if (n > 0) {
            ax = vx / n - me.vx;
            ay = vy / n - me.vy;
        }
        // cohesion
        double cx = 0, cy = 0;
        others([&](const Boid&, double dx, double dy, double d) {
            if (d < r.perception) {
                cx += dx;
                cy += dy;
            }
        });
        if (n > 0) {
            cx /= n;
            cy /= n;
        }

        clip(sx, sy, r.max_force);
        clip(ax, ay, r.max_force);
        clip(cx, cy, r.max_force);
        double nvx = me.vx + (r.w_sep * sx + r.w_align * ax + r.w_coh * cx);
        double nvy = me.vy + (r.w_sep * sy + r.w_align * ay + r.w_coh * cy);
        clip(nvx, nvy, r.max_speed);
        next.push_back({wrap_coord(me.x + nvx, r.width), wrap_coord(me.y + nvy, r.height), nvx, nvy});
    }
    return next;
}

} // namespace oracle
