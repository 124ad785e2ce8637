#include "flowgen/sim/fluid.hpp"

#include "flowgen/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace flowgen::sim {

FluidState::FluidState(int width, int height, FluidParams params)
    : width_(width), height_(height), params_(params) {
    if (width < 2 || height < 2) throw ValidationError("FluidState: grid must be at least 2x2");
    if (params.substeps < 1) throw ValidationError("FluidState: substeps must be >= 1");
    if (params.viscosity < 0.0) throw ValidationError("FluidState: viscosity must be >= 0");
    if (params.pressure_max_iterations < 1 || !(params.pressure_tolerance > 0.0)) {
        throw ValidationError("FluidState: pressure solver needs a positive iteration cap and tolerance");
    }
    if (!std::isfinite(params.buoyancy.x) || !std::isfinite(params.buoyancy.y)) {
        throw ValidationError("FluidState: buoyancy must be finite");
    }
    u_.assign(static_cast<std::size_t>(width + 1) * height, 0.0);
    v_.assign(static_cast<std::size_t>(width) * (height + 1), 0.0);
    density_.assign(static_cast<std::size_t>(width) * height, 0.0);
    heat_.assign(density_.size(), 0.0);
    obstacles_ = Mask(width, height);
}

void FluidState::set_density(int x, int y, double value) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
        throw ValidationError("FluidState: density must be finite and >= 0");
    }
    density_[cell(x, y)] = obstacles_.at(x, y) ? 0.0 : value;
}

void FluidState::set_heat(int x, int y, double value) {
    if (!std::isfinite(value)) throw ValidationError("FluidState: heat must be finite");
    heat_[cell(x, y)] = obstacles_.at(x, y) ? 0.0 : value;
}

void FluidState::set_obstacle(int x, int y, bool solid) {
    obstacles_.set(x, y, solid);
    if (solid) {
        density_[cell(x, y)] = 0.0;
        heat_[cell(x, y)] = 0.0;
    }
    apply_boundaries();
}

bool FluidState::u_face_open(int i, int j) const {
    if (i <= 0 || i >= width_) return false;
    return !obstacles_.at(i - 1, j) && !obstacles_.at(i, j);
}

bool FluidState::v_face_open(int i, int j) const {
    if (j <= 0 || j >= height_) return false;
    return !obstacles_.at(i, j - 1) && !obstacles_.at(i, j);
}

Vec2 FluidState::cell_velocity(int x, int y) const {
    return {0.5 * (face_u(x, y) + face_u(x + 1, y)), 0.5 * (face_v(x, y) + face_v(x, y + 1))};
}

void FluidState::fill_velocity(Vec2 velocity) {
    std::fill(u_.begin(), u_.end(), velocity.x);
    std::fill(v_.begin(), v_.end(), velocity.y);
    apply_boundaries();
}

void FluidState::apply_boundaries() {
    for (int j = 0; j < height_; ++j) {
        for (int i = 0; i <= width_; ++i) {
            if (!u_face_open(i, j)) face_u(i, j) = 0.0;
        }
    }
    for (int j = 0; j <= height_; ++j) {
        for (int i = 0; i < width_; ++i) {
            if (!v_face_open(i, j)) face_v(i, j) = 0.0;
        }
    }
}

FluidState fluid_init_from_mask(const Mask& smoke, const Mask& obstacles, Vec2 buoyancy,
                                FluidParams params) {
    if (!smoke.same_dims(obstacles)) {
        throw ValidationError("fluid_init_from_mask: smoke mask and obstacle mask differ in size");
    }
    params.buoyancy = buoyancy;
    FluidState state(smoke.width(), smoke.height(), params);
    for (int y = 0; y < smoke.height(); ++y) {
        for (int x = 0; x < smoke.width(); ++x) {
            if (smoke.at(x, y) && obstacles.at(x, y)) {
                throw ValidationError("fluid_init_from_mask: smoke overlaps an obstacle at (" +
                                      std::to_string(x) + ", " + std::to_string(y) + ")");
            }
            if (obstacles.at(x, y)) state.set_obstacle(x, y, true);
            if (smoke.at(x, y)) {
                state.set_density(x, y, 1.0);
                state.set_heat(x, y, 1.0);
            }
        }
    }
    return state;
}

FluidState fluid_init_from_sources(const std::vector<SmokeSource>& sources, const Mask& obstacles,
                                   Vec2 buoyancy, FluidParams params) {
    params.buoyancy = buoyancy;
    FluidState state(obstacles.width(), obstacles.height(), params);
    for (int y = 0; y < obstacles.height(); ++y) {
        for (int x = 0; x < obstacles.width(); ++x) {
            if (obstacles.at(x, y)) state.set_obstacle(x, y, true);
        }
    }
    for (const SmokeSource& src : sources) {
        if (!src.mask.same_dims(obstacles)) {
            throw ValidationError("fluid_init_from_sources: source mask and obstacle mask differ in size");
        }
        for (int y = 0; y < obstacles.height(); ++y) {
            for (int x = 0; x < obstacles.width(); ++x) {
                if (!src.mask.at(x, y)) continue;
                if (obstacles.at(x, y)) {
                    throw ValidationError("fluid_init_from_sources: smoke overlaps an obstacle at (" +
                                          std::to_string(x) + ", " + std::to_string(y) + ")");
                }
                state.set_density(x, y, 1.0);
                state.set_heat(x, y, src.heat);
            }
        }
    }
    return state;
}

// Stage implementations. Friend of FluidState so the stages can work on the
// raw face arrays without per-element bounds plumbing.
struct FluidStepper {
    // Face grids sampled at continuous positions given in cell-centre coordinates.
    static double sample(const std::vector<double>& field, int nx, int ny, double gx, double gy) {
        gx = std::clamp(gx, 0.0, static_cast<double>(nx - 1));
        gy = std::clamp(gy, 0.0, static_cast<double>(ny - 1));
        // Every staggered grid here is at least 2 samples wide in each direction.
        const int x0 = std::min(static_cast<int>(gx), nx - 2);
        const int y0 = std::min(static_cast<int>(gy), ny - 2);
        const int x1 = x0 + 1;
        const int y1 = y0 + 1;
        const double ax = gx - x0;
        const double ay = gy - y0;
        auto at = [&](int x, int y) { return field[static_cast<std::size_t>(y) * nx + x]; };
        return (1 - ax) * (1 - ay) * at(x0, y0) + ax * (1 - ay) * at(x1, y0) +
               (1 - ax) * ay * at(x0, y1) + ax * ay * at(x1, y1);
    }

    static Vec2 velocity_at(const FluidState& s, double x, double y) {
        return {sample(s.u_, s.width_ + 1, s.height_, x + 0.5, y),
                sample(s.v_, s.width_, s.height_ + 1, x, y + 0.5)};
    }

    static Vec2 backtrace(const FluidState& s, double x, double y, double dt) {
        const Vec2 v0 = velocity_at(s, x, y);
        if (s.params_.backtrace == Backtrace::euler) return {x - dt * v0.x, y - dt * v0.y};
        const Vec2 vm = velocity_at(s, x - 0.5 * dt * v0.x, y - 0.5 * dt * v0.y);
        return {x - dt * vm.x, y - dt * vm.y};
    }

    static void advect(const FluidState& src, FluidState& dst, double dt) {
        const int w = src.width_;
        const int h = src.height_;
        for (int j = 0; j < h; ++j) {
            for (int i = 0; i <= w; ++i) {
                if (!src.u_face_open(i, j)) continue;
                const Vec2 p = backtrace(src, i - 0.5, j, dt);
                dst.face_u(i, j) = sample(src.u_, w + 1, h, p.x + 0.5, p.y);
            }
        }
        for (int j = 0; j <= h; ++j) {
            for (int i = 0; i < w; ++i) {
                if (!src.v_face_open(i, j)) continue;
                const Vec2 p = backtrace(src, i, j - 0.5, dt);
                dst.face_v(i, j) = sample(src.v_, w, h + 1, p.x, p.y + 0.5);
            }
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (src.obstacles_.at(x, y)) continue;
                const Vec2 p = backtrace(src, x, y, dt);
                // Bilinear weights are non-negative, so density stays >= 0.
                dst.density_[dst.cell(x, y)] = std::max(0.0, sample(src.density_, w, h, p.x, p.y));
                dst.heat_[dst.cell(x, y)] = sample(src.heat_, w, h, p.x, p.y);
            }
        }
    }

    static void add_buoyancy(FluidState& s, double dt) {
        const Vec2 b = s.params_.buoyancy;
        if (b.x == 0.0 && b.y == 0.0) return;
        for (int j = 0; j < s.height_; ++j) {
            for (int i = 1; i < s.width_; ++i) {
                if (!s.u_face_open(i, j)) continue;
                s.face_u(i, j) += b.x * 0.5 * (s.heat(i - 1, j) + s.heat(i, j)) * dt;
            }
        }
        for (int j = 1; j < s.height_; ++j) {
            for (int i = 0; i < s.width_; ++i) {
                if (!s.v_face_open(i, j)) continue;
                s.face_v(i, j) += b.y * 0.5 * (s.heat(i, j - 1) + s.heat(i, j)) * dt;
            }
        }
    }

    // Implicit viscosity (I - nu dt Laplacian) x = x0 by Jacobi sweeps over open faces.
    template <typename IsOpen>
    static void diffuse_faces(std::vector<double>& field, int nx, int ny, double a, int iterations,
                              IsOpen is_open) {
        const std::vector<double> rhs = field;
        std::vector<double> next = field;
        for (int it = 0; it < iterations; ++it) {
            for (int j = 0; j < ny; ++j) {
                for (int i = 0; i < nx; ++i) {
                    const std::size_t k = static_cast<std::size_t>(j) * nx + i;
                    if (!is_open(i, j)) continue;
                    double sum = 0.0;
                    int count = 0;
                    const int ni[4] = {i - 1, i + 1, i, i};
                    const int nj[4] = {j, j, j - 1, j + 1};
                    for (int q = 0; q < 4; ++q) {
                        if (ni[q] < 0 || nj[q] < 0 || ni[q] >= nx || nj[q] >= ny) continue;
                        sum += field[static_cast<std::size_t>(nj[q]) * nx + ni[q]];
                        ++count;
                    }
                    next[k] = (rhs[k] + a * sum) / (1.0 + a * count);
                }
            }
            field.swap(next);
        }
    }

    static void diffuse(FluidState& s, double dt) {
        if (s.params_.viscosity <= 0.0) return;
        const double a = s.params_.viscosity * dt;
        const int iters = s.params_.diffusion_iterations;
        diffuse_faces(s.u_, s.width_ + 1, s.height_, a, iters,
                      [&](int i, int j) { return s.u_face_open(i, j); });
        diffuse_faces(s.v_, s.width_, s.height_ + 1, a, iters,
                      [&](int i, int j) { return s.v_face_open(i, j); });
        s.apply_boundaries();
    }

    struct Projection {
        bool converged = true;
        int iterations = 0;
    };

    // Solves sum_open(p_nb - p_c) = div_c on fluid cells (pure Neumann at walls
    // and obstacles), then subtracts the pressure gradient on open faces. The
    // residual of that system is exactly the post-projection divergence, so it
    // doubles as the stopping criterion. Cells are swept in a fixed raster order.
    static Projection project(FluidState& s) {
        const int w = s.width_;
        const int h = s.height_;
        const std::size_t n = static_cast<std::size_t>(w) * h;
        std::vector<double> div(n, 0.0), p(n, 0.0);
        std::vector<unsigned char> open_count(n, 0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (s.obstacles_.at(x, y)) continue;
                const std::size_t c = s.cell(x, y);
                div[c] = s.face_u(x + 1, y) - s.face_u(x, y) + s.face_v(x, y + 1) - s.face_v(x, y);
                open_count[c] = static_cast<unsigned char>(s.u_face_open(x, y) + s.u_face_open(x + 1, y) +
                                                           s.v_face_open(x, y) + s.v_face_open(x, y + 1));
            }
        }

        auto neighbour_sum = [&](int x, int y) {
            double sum = 0.0;
            if (s.u_face_open(x, y)) sum += p[s.cell(x - 1, y)];
            if (s.u_face_open(x + 1, y)) sum += p[s.cell(x + 1, y)];
            if (s.v_face_open(x, y)) sum += p[s.cell(x, y - 1)];
            if (s.v_face_open(x, y + 1)) sum += p[s.cell(x, y + 1)];
            return sum;
        };
        auto max_residual = [&]() {
            double worst = 0.0;
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const std::size_t c = s.cell(x, y);
                    if (s.obstacles_.at(x, y)) continue;
                    const double r = div[c] - (neighbour_sum(x, y) - open_count[c] * p[c]);
                    worst = std::max(worst, std::abs(r));
                }
            }
            return worst;
        };

        double omega = s.params_.sor_omega;
        if (omega <= 0.0) omega = 2.0 / (1.0 + std::sin(std::numbers::pi / std::max(w, h)));

        // Leave headroom below the tolerance for the round-off of the final face update.
        const double target = 0.5 * s.params_.pressure_tolerance;
        constexpr int kCheckEvery = 4;
        Projection result;
        result.converged = max_residual() <= target;
        while (!result.converged && result.iterations < s.params_.pressure_max_iterations) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const std::size_t c = s.cell(x, y);
                    if (open_count[c] == 0 || s.obstacles_.at(x, y)) continue;
                    const double gs = (neighbour_sum(x, y) - div[c]) / open_count[c];
                    p[c] += omega * (gs - p[c]);
                }
            }
            ++result.iterations;
            if (result.iterations % kCheckEvery == 0 ||
                result.iterations == s.params_.pressure_max_iterations) {
                result.converged = max_residual() <= target;
            }
        }

        for (int y = 0; y < h; ++y) {
            for (int x = 1; x < w; ++x) {
                if (s.u_face_open(x, y)) s.face_u(x, y) -= p[s.cell(x, y)] - p[s.cell(x - 1, y)];
            }
        }
        for (int y = 1; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (s.v_face_open(x, y)) s.face_v(x, y) -= p[s.cell(x, y)] - p[s.cell(x, y - 1)];
            }
        }
        return result;
    }
};

FluidStepResult fluid_step(const FluidState& state) {
    const int w = state.width();
    const int h = state.height();
    const int substeps = state.params().substeps;
    const double dt = 1.0 / substeps;

    FluidStepResult result;
    result.flow = FlowField(w, h, FlowConvention::forward);
    std::vector<double> flow_u(static_cast<std::size_t>(w) * h, 0.0);
    std::vector<double> flow_v(flow_u.size(), 0.0);

    FluidState current = state;
    current.apply_boundaries();
    for (int step = 0; step < substeps; ++step) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const Vec2 v = current.cell_velocity(x, y);
                flow_u[static_cast<std::size_t>(y) * w + x] += v.x * dt;
                flow_v[static_cast<std::size_t>(y) * w + x] += v.y * dt;
            }
        }
        FluidState next = current;
        FluidStepper::advect(current, next, dt);
        FluidStepper::add_buoyancy(next, dt);
        FluidStepper::diffuse(next, dt);
        const auto projection = FluidStepper::project(next);
        result.converged = result.converged && projection.converged;
        result.pressure_iterations += projection.iterations;
        current = std::move(next);
    }
    result.flow = FlowField(w, h, FlowConvention::forward, std::move(flow_u), std::move(flow_v));
    result.max_divergence = max_divergence(current);
    result.state = std::move(current);
    return result;
}

double max_divergence(const FluidState& state) {
    double worst = 0.0;
    for (int y = 0; y < state.height(); ++y) {
        for (int x = 0; x < state.width(); ++x) {
            if (state.obstacle(x, y)) continue;
            const double div = state.face_u(x + 1, y) - state.face_u(x, y) + state.face_v(x, y + 1) -
                               state.face_v(x, y);
            worst = std::max(worst, std::abs(div));
        }
    }
    return worst;
}

} // namespace flowgen::sim
