#pragma once

#include "flowgen/flow/flow_ops.hpp"
#include "flowgen/flow/grid.hpp"
#include "flowgen/sampler/pipeline.hpp"
#include "flowgen/sampler/schedule.hpp"
#include "flowgen/sim/boids.hpp"
#include "flowgen/sim/fluid.hpp"
#include "flowgen/sim/rigid.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace flowgen::scene {

struct FluidScene {
    std::vector<sim::SmokeSource> sources;
    Mask obstacles;
    sim::Vec2 buoyancy;
    sim::FluidParams params;
    /// Random initial velocity amplitude (px/step) drawn from the scene seed; 0 = at rest.
    double initial_velocity_noise = 0.0;
};

struct BoidsScene {
    std::vector<sim::Agent> agents;
    sim::BoidsParams params;
    sim::BoundsPolicy bounds = sim::BoundsPolicy::wrap;
    /// Radius of the disk each agent's displacement is painted into.
    double patch_radius = 6.0;
};

struct RigidScene {
    sim::RigidMotionSpec motion;
};

using SimulatorConfig = std::variant<FluidScene, BoidsScene, RigidScene>;

struct EtaConfig {
    double threshold = 1.0;
    /// Canvas-resolution masks forced to eta = 1 (after max-pooling).
    std::vector<Mask> masks;
    /// Also force eta = 1 where a rigid motion reports occlusion.
    bool occlusion = true;
};

struct ToyConfig {
    /// Prior standard deviation of the analytic denoiser.
    double prior_s = 10.0;
    double negative_shift = 0.0;
};

struct SceneSpec {
    std::string name;
    int width = 0;
    int height = 0;
    int frames = 1;
    std::uint64_t seed = 0;
    int latent_factor = 8;
    SimulatorConfig simulator;
    EtaConfig eta;
    SamplerParams sampler;
    ScheduleConfig schedule;
    ToyConfig toy;
    std::string description;
    /// SHA-256 (hex) of the spec file bytes.
    std::string source_sha256;

    int latent_width() const { return width / latent_factor; }
    int latent_height() const { return height / latent_factor; }
};

/// Parses a scene document. Relative mask paths resolve against `base_dir`.
/// Errors are ValidationError with "<origin>:<line>:<column>: <pointer>: <message>".
SceneSpec parse_scene(std::string_view text, const std::filesystem::path& base_dir, const std::string& origin);
SceneSpec load_scene(const std::filesystem::path& path);

const char* simulator_name(const SimulatorConfig& simulator);

} // namespace flowgen::scene
