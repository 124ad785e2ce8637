#pragma once

#include <cmath>

namespace flowgen::sim {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

} // namespace flowgen::sim
