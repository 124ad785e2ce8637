#pragma once

#include "flowgen/metrics/metrics.hpp"
#include "flowgen/sampler/pipeline.hpp"
#include "flowgen/scene/manifest.hpp"
#include "flowgen/scene/scene.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace flowgen::scene {

/// Steps a scene's simulator one frame at a time and turns each step into the
/// backward latent-resolution flow and eta map for the next frame. Holds only
/// the simulator state, so memory does not grow with the frame count.
class MotionGenerator {
public:
    explicit MotionGenerator(const SceneSpec& spec);
    ~MotionGenerator();
    MotionGenerator(MotionGenerator&&) noexcept;
    MotionGenerator& operator=(MotionGenerator&&) noexcept;

    /// Index of the frame the next call to next() produces (starts at 1).
    int next_frame() const;
    FrameMotion next();
    /// Canvas-resolution forward flow of the most recent step.
    const FlowField& last_forward_flow() const;
    const std::vector<std::string>& warnings() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string numbered(const char* prefix, int index, const char* extension);

/// Writes flow_NNNN.flo and eta_NNNN.npy for frames 1..N-1 plus manifest.json.
/// Byte-identical across runs of the same spec.
Manifest run_scene(const SceneSpec& spec, const std::filesystem::path& output_dir);

struct ToyRunResult {
    Manifest manifest;
    std::vector<TensorGrid> frames;
    /// Absent for single-frame runs or frames smaller than 16x16.
    std::optional<MotionConsistencyReport> motion_consistency;
    bool clamped = false;
};

/// Runs the full frame loop with the identity codec and an analytic Gaussian
/// denoiser centred on the first frame. The first frame must already be at
/// latent resolution. Writes frame_NNNN.png, metrics.json and manifest.json.
ToyRunResult run_toy_pipeline(const SceneSpec& spec, const TensorGrid& first_frame,
                              const std::filesystem::path& output_dir);
ToyRunResult run_toy_pipeline(const SceneSpec& spec, const std::filesystem::path& first_frame_path,
                              const std::filesystem::path& output_dir);

/// {"per_pair": [...], "mean": x}
std::string metrics_report_json(const MotionConsistencyReport& report);

} // namespace flowgen::scene
