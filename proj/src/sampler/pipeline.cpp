#include "flowgen/sampler/pipeline.hpp"

#include "flowgen/error.hpp"
#include "flowgen/flow/flow_ops.hpp"
#include "flowgen/sampler/ddim.hpp"
#include "flowgen/sampler/rng.hpp"

#include <cmath>
#include <string>

namespace flowgen {

namespace {

// Stream tags; step noise uses (frame, timestep) with timestep < 2^32.
constexpr std::uint64_t kAttendTag = 1ull << 40;
constexpr std::uint64_t kFreshNoiseTag = 2ull << 40;

AttendList attend_list(AttendSet set, const TensorGrid& self, const TensorGrid* first, const TensorGrid* prev) {
    switch (set) {
    case AttendSet::self: return {&self};
    case AttendSet::first: return {first};
    case AttendSet::previous: return {prev};
    case AttendSet::first_and_previous: return {first, prev};
    }
    return {&self};
}

} // namespace

const char* to_string(AttendSet set) {
    switch (set) {
    case AttendSet::self: return "self";
    case AttendSet::first: return "first";
    case AttendSet::previous: return "previous";
    case AttendSet::first_and_previous: return "first_and_previous";
    }
    return "?";
}

AttendSet parse_attend_set(std::string_view name) {
    for (AttendSet s : {AttendSet::self, AttendSet::first, AttendSet::previous, AttendSet::first_and_previous}) {
        if (name == to_string(s)) return s;
    }
    throw ValidationError("unknown attend set '" + std::string(name) + "'");
}

GenerationSummary generate_video_streaming(const TensorGrid& first_frame, int frame_count,
                                           const MotionSource& motion, const Denoiser& denoiser,
                                           const Codec& codec, const NoiseSchedule& schedule,
                                           const SamplerParams& params, const FrameSink& sink,
                                           const LoopState* resume, const CheckpointSink& checkpoint) {
    if (frame_count < 1) throw ValidationError("generate_video: need at least one frame");
    if (!std::isfinite(params.gamma) || params.gamma < 0.0) {
        throw ValidationError("generate_video: gamma must be finite and non-negative");
    }
    if (params.eta_scalar && !(*params.eta_scalar >= 0.0 && *params.eta_scalar <= 1.0)) {
        throw ValidationError("generate_video: eta must lie in [0, 1]");
    }

    GenerationSummary summary;
    LoopState state;
    if (resume != nullptr) {
        if (resume->seed != params.seed || resume->frame_count != frame_count) {
            throw ValidationError("generate_video: checkpoint was written for a different run");
        }
        state = *resume;
    } else {
        state.frame_count = frame_count;
        state.seed = params.seed;
        state.first_latent = codec.encode(first_frame);
        state.previous_frame = first_frame;
        sink(0, first_frame);
        ++summary.frames_emitted;
    }

    const CounterRng rng(params.seed);
    const std::vector<int> steps = schedule.steps_to_tau();
    const int tau = schedule.tau();
    const TensorGrid& first_latent = state.first_latent;

    for (int f = state.next_frame; f < frame_count; ++f) {
        const FrameMotion m = motion(f);
        const TensorGrid prev_latent = codec.encode(state.previous_frame);
        if (!prev_latent.same_shape(first_latent)) {
            throw ValidationError("generate_video: codec produced latents of varying shape");
        }
        if (m.flow.width() != prev_latent.width() || m.flow.height() != prev_latent.height()) {
            throw ValidationError("generate_video: flow " + std::to_string(f) +
                                  " does not match the latent size");
        }
        const EtaMap eta = params.eta_scalar
                               ? EtaMap::uniform(prev_latent.width(), prev_latent.height(), *params.eta_scalar)
                               : m.eta;
        if (eta.width() != prev_latent.width() || eta.height() != prev_latent.height()) {
            throw ValidationError("generate_video: eta map " + std::to_string(f) +
                                  " does not match the latent size");
        }

        TensorGrid z = prev_latent;
        if (params.use_inversion) {
            for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
                const TensorGrid eps = denoiser.predict(z, steps[i], params.conditioning, PromptBranch::positive,
                                                        AttendList{&z});
                z = ddim_inversion_step(z, eps, steps[i], steps[i + 1], schedule);
            }
        } else {
            z = noise_latent(z, tau, rng.substream(static_cast<std::uint64_t>(f), kFreshNoiseTag), schedule);
        }
        z = warp_backward(z, m.flow);

        const bool need_first = params.attend == AttendSet::first || params.attend == AttendSet::first_and_previous;
        const bool need_prev =
            params.attend == AttendSet::previous || params.attend == AttendSet::first_and_previous;
        const CounterRng first_noise = rng.substream(0, kAttendTag);
        const CounterRng prev_noise = rng.substream(static_cast<std::uint64_t>(f - 1), kAttendTag);
        for (std::size_t i = steps.size() - 1; i > 0; --i) {
            const int t = steps[i];
            TensorGrid first_t, prev_t;
            if (need_first) first_t = noise_latent(first_latent, t, first_noise, schedule);
            if (need_prev) prev_t = noise_latent(prev_latent, t, prev_noise, schedule);
            const AttendList attend = attend_list(params.attend, z, &first_t, &prev_t);

            TensorGrid eps = denoiser.predict(z, t, params.conditioning, PromptBranch::positive, attend);
            if (params.gamma != 1.0) {
                const TensorGrid eps_uncond =
                    denoiser.predict(z, t, params.conditioning, PromptBranch::negative, attend);
                eps = cfg_combine(eps, eps_uncond, params.gamma);
            }
            StepResult step = ddim_step(z, eps, t, steps[i - 1], eta,
                                        rng.substream(static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(t)),
                                        schedule);
            summary.clamped = summary.clamped || step.clamped;
            z = std::move(step.latent);
        }

        state.previous_frame = codec.decode(z);
        state.next_frame = f + 1;
        sink(f, state.previous_frame);
        ++summary.frames_emitted;
        if (checkpoint) checkpoint(state);
    }
    return summary;
}

std::vector<TensorGrid> generate_video(const TensorGrid& first_frame, const std::vector<FlowField>& flows,
                                       const std::vector<EtaMap>& eta_maps, const Denoiser& denoiser,
                                       const Codec& codec, const NoiseSchedule& schedule,
                                       const SamplerParams& params, bool* clamped) {
    const bool maps_ok = eta_maps.size() == flows.size() || (params.eta_scalar && eta_maps.empty());
    if (!maps_ok) throw ValidationError("generate_video: need one eta map per flow");

    std::vector<TensorGrid> frames;
    frames.reserve(flows.size() + 1);
    const auto summary = generate_video_streaming(
        first_frame, static_cast<int>(flows.size()) + 1,
        [&](int f) {
            const auto i = static_cast<std::size_t>(f - 1);
            return FrameMotion{flows[i], eta_maps.empty() ? EtaMap() : eta_maps[i]};
        },
        denoiser, codec, schedule, params, [&](int, const TensorGrid& frame) { frames.push_back(frame); });
    if (clamped != nullptr) *clamped = summary.clamped;
    return frames;
}

} // namespace flowgen
