#pragma once

#include "flowgen/flow/grid.hpp"
#include "flowgen/sim/vec2.hpp"

#include <vector>

namespace flowgen::sim {

enum class Backtrace { euler, rk2 };

struct FluidParams {
    /// Force per unit heat added to the velocity each step (px/step^2).
    Vec2 buoyancy;
    /// Kinematic viscosity; 0 disables the diffusion stage.
    double viscosity = 0.0;
    int diffusion_iterations = 40;
    /// Internal sub-steps per frame; the emitted flow sums their displacements.
    int substeps = 1;
    int pressure_max_iterations = 400;
    double pressure_tolerance = 1e-4;
    /// Over-relaxation factor of the pressure sweep. 0 selects
    /// 2 / (1 + sin(pi / max(width, height))); 1 is plain Gauss-Seidel.
    double sor_omega = 0.0;
    Backtrace backtrace = Backtrace::euler;

    friend bool operator==(const FluidParams&, const FluidParams&) = default;
};

/// Smoke on a staggered (MAC) grid of unit cells. Horizontal velocities live on
/// the (width + 1) x height vertical faces, vertical velocities on the
/// width x (height + 1) horizontal faces; density and obstacles are per cell.
/// Cell (x, y) is centred at pixel (x, y).
class FluidState {
public:
    FluidState() = default;
    FluidState(int width, int height, FluidParams params = {});

    int width() const { return width_; }
    int height() const { return height_; }
    const FluidParams& params() const { return params_; }
    FluidParams& params() { return params_; }

    double face_u(int i, int j) const { return u_[static_cast<std::size_t>(j) * (width_ + 1) + i]; }
    double& face_u(int i, int j) { return u_[static_cast<std::size_t>(j) * (width_ + 1) + i]; }
    double face_v(int i, int j) const { return v_[static_cast<std::size_t>(j) * width_ + i]; }
    double& face_v(int i, int j) { return v_[static_cast<std::size_t>(j) * width_ + i]; }

    double density(int x, int y) const { return density_[cell(x, y)]; }
    /// Negative values are rejected.
    void set_density(int x, int y, double value);

    /// Signed scalar carried with the smoke; buoyancy acts on it. Negative heat
    /// pushes against the buoyancy direction.
    double heat(int x, int y) const { return heat_[cell(x, y)]; }
    void set_heat(int x, int y, double value);

    bool obstacle(int x, int y) const { return obstacles_.at(x, y); }
    const Mask& obstacles() const { return obstacles_; }
    /// Marks a cell solid: its density is cleared and its faces close.
    void set_obstacle(int x, int y, bool solid);

    /// A face is open when it is interior and neither adjacent cell is solid.
    bool u_face_open(int i, int j) const;
    bool v_face_open(int i, int j) const;

    /// Average of the four faces around the cell.
    Vec2 cell_velocity(int x, int y) const;
    /// Sets every face to the given velocity, then closes walls and obstacles.
    void fill_velocity(Vec2 velocity);
    /// Zeros the velocity on every closed face.
    void apply_boundaries();

    friend bool operator==(const FluidState&, const FluidState&) = default;

private:
    std::size_t cell(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

    int width_ = 0;
    int height_ = 0;
    FluidParams params_;
    std::vector<double> u_;
    std::vector<double> v_;
    std::vector<double> density_;
    std::vector<double> heat_;
    Mask obstacles_;

    friend struct FluidStepper;
};

/// density = heat = 1 on `smoke`, 0 elsewhere; zero velocity. Throws ValidationError when
/// the masks differ in size or overlap.
FluidState fluid_init_from_mask(const Mask& smoke, const Mask& obstacles, Vec2 buoyancy,
                                FluidParams params = {});

struct SmokeSource {
    Mask mask;
    double heat = 1.0;
};

/// Like fluid_init_from_mask with one heat value per source; later sources
/// overwrite earlier ones where they overlap.
FluidState fluid_init_from_sources(const std::vector<SmokeSource>& sources, const Mask& obstacles,
                                   Vec2 buoyancy, FluidParams params = {});

struct FluidStepResult {
    FluidState state;
    /// Pre-step cell-centred velocity times dt, summed over sub-steps.
    FlowField flow;
    bool converged = true;
    int pressure_iterations = 0;
    /// Max |div v| over fluid cells after projection.
    double max_divergence = 0.0;
};

/// Advection, buoyancy, optional viscous diffusion, pressure projection, in that order.
FluidStepResult fluid_step(const FluidState& state);

/// Max |div v| over non-obstacle cells.
double max_divergence(const FluidState& state);

} // namespace flowgen::sim
