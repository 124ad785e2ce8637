#pragma once

#include "flowgen/flow/grid.hpp"
#include "flowgen/sampler/denoiser.hpp"
#include "flowgen/sampler/schedule.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flowgen {

/// Which cached latents the denoiser attends to while generating frame f.
/// Their keys and values replace the frame's own; queries always come from
/// the latent being denoised.
enum class AttendSet { self, first, previous, first_and_previous };

const char* to_string(AttendSet set);
AttendSet parse_attend_set(std::string_view name);

struct SamplerParams {
    double gamma = 7.5;
    /// Scalar eta for every pixel when set; per-frame eta maps are used otherwise.
    std::optional<double> eta_scalar;
    AttendSet attend = AttendSet::first_and_previous;
    std::uint64_t seed = 0;
    /// false: warp a freshly noised latent instead of the inverted one.
    bool use_inversion = true;
    Conditioning conditioning;
};

/// Everything needed to continue generation after frame next_frame - 1.
/// Random draws are keyed by (seed, frame, timestep), so no generator
/// position has to be stored.
struct LoopState {
    int next_frame = 1;
    int frame_count = 0;
    std::uint64_t seed = 0;
    TensorGrid first_latent;
    TensorGrid previous_frame;

    friend bool operator==(const LoopState&, const LoopState&) = default;
};

/// Versioned binary blob: 8-byte magic, u32 version, u64 seed, i32 next_frame,
/// i32 frame_count, u32 tensor count, then (u64 length, float64 NPY bytes) per
/// tensor. All integers little-endian.
std::string encode_checkpoint(const LoopState& state);
LoopState decode_checkpoint(std::string_view bytes);

struct FrameMotion {
    FlowField flow; ///< backward, latent resolution
    EtaMap eta;     ///< ignored when SamplerParams::eta_scalar is set
};

/// Supplies the motion for frame f in [1, frame_count).
using MotionSource = std::function<FrameMotion(int frame)>;
using FrameSink = std::function<void(int frame, const TensorGrid& image)>;
using CheckpointSink = std::function<void(const LoopState& state)>;

struct GenerationSummary {
    int frames_emitted = 0;
    /// Some ddim_step clamped a negative variance term.
    bool clamped = false;
};

/// Autoregressive frame loop. Frame 0 is emitted unchanged (unless resuming).
/// For each later frame: encode the previous frame, invert it to tau with the
/// positive prompt and self-attention, warp it with the frame's flow, then run
/// the reverse steps down to the first step index with CFG, cross-frame
/// attention and the frame's eta, and decode. Only the first latent and the
/// previous frame are retained.
GenerationSummary generate_video_streaming(const TensorGrid& first_frame, int frame_count,
                                           const MotionSource& motion, const Denoiser& denoiser,
                                           const Codec& codec, const NoiseSchedule& schedule,
                                           const SamplerParams& params, const FrameSink& sink,
                                           const LoopState* resume = nullptr,
                                           const CheckpointSink& checkpoint = {});

/// Collects every frame. Requires |flows| = N - 1 and |eta_maps| either N - 1 or,
/// with a scalar eta, zero.
std::vector<TensorGrid> generate_video(const TensorGrid& first_frame, const std::vector<FlowField>& flows,
                                       const std::vector<EtaMap>& eta_maps, const Denoiser& denoiser,
                                       const Codec& codec, const NoiseSchedule& schedule,
                                       const SamplerParams& params, bool* clamped = nullptr);

} // namespace flowgen
