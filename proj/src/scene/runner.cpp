#include "flowgen/scene/runner.hpp"

#include "flowgen/error.hpp"
#include "flowgen/flow/flow_ops.hpp"
#include "flowgen/flow/io.hpp"
#include "flowgen/sampler/denoiser.hpp"
#include "flowgen/sampler/rng.hpp"

#include <json.hpp>

#include <cstdio>
#include <system_error>

namespace flowgen::scene {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

Mask mask_union(const Mask& a, const Mask& b) {
    Mask out = a;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            if (b.at(x, y)) out.set(x, y, true);
        }
    }
    return out;
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw RuntimeError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

ManifestEntry write_entry(const std::filesystem::path& dir, const std::string& name, const std::string& bytes,
                          const char* kind) {
    io::write_file_atomic(dir / name, bytes);
    return {name, sha256_hex(bytes), bytes.size(), kind};
}

Manifest manifest_header(const SceneSpec& spec) {
    Manifest m;
    m.scene = spec.name;
    m.spec_sha256 = spec.source_sha256;
    m.simulator = simulator_name(spec.simulator);
    m.width = spec.width;
    m.height = spec.height;
    m.latent_width = spec.latent_width();
    m.latent_height = spec.latent_height();
    m.frames = spec.frames;
    m.seed = spec.seed;
    return m;
}

sim::FluidState initial_fluid(const FluidScene& cfg, std::uint64_t seed) {
    sim::FluidState state = sim::fluid_init_from_sources(cfg.sources, cfg.obstacles, cfg.buoyancy, cfg.params);
    if (cfg.initial_velocity_noise > 0.0) {
        const CounterRng rng = CounterRng(seed).substream(0xF1D);
        const double a = cfg.initial_velocity_noise;
        std::uint64_t k = 0;
        for (int j = 0; j < state.height(); ++j) {
            for (int i = 0; i <= state.width(); ++i) state.face_u(i, j) = a * (2.0 * rng.uniform(k++) - 1.0);
        }
        for (int j = 0; j <= state.height(); ++j) {
            for (int i = 0; i < state.width(); ++i) state.face_v(i, j) = a * (2.0 * rng.uniform(k++) - 1.0);
        }
        state.apply_boundaries();
    }
    return state;
}

} // namespace

struct MotionGenerator::Impl {
    SceneSpec spec;
    int next_frame = 1;
    std::variant<sim::FluidState, sim::BoidsState, sim::RigidFlow> state;
    Mask user_mask;
    FlowField last_forward;
    std::vector<std::string> warnings;
};

MotionGenerator::MotionGenerator(const SceneSpec& spec) : impl_(std::make_unique<Impl>()) {
    impl_->spec = spec;
    impl_->user_mask = Mask(spec.width, spec.height);
    for (const Mask& m : spec.eta.masks) impl_->user_mask = mask_union(impl_->user_mask, m);
    std::visit(overloaded{
                   [&](const FluidScene& f) { impl_->state = initial_fluid(f, spec.seed); },
                   [&](const BoidsScene& b) {
                       sim::BoidsState s;
                       s.agents = b.agents;
                       s.params = b.params;
                       s.width = spec.width;
                       s.height = spec.height;
                       s.bounds = b.bounds;
                       impl_->state = std::move(s);
                   },
                   [&](const RigidScene& r) { impl_->state = sim::rigid_flow(r.motion, spec.width, spec.height); },
               },
               spec.simulator);
}

MotionGenerator::~MotionGenerator() = default;
MotionGenerator::MotionGenerator(MotionGenerator&&) noexcept = default;
MotionGenerator& MotionGenerator::operator=(MotionGenerator&&) noexcept = default;

int MotionGenerator::next_frame() const { return impl_->next_frame; }
const FlowField& MotionGenerator::last_forward_flow() const { return impl_->last_forward; }
const std::vector<std::string>& MotionGenerator::warnings() const { return impl_->warnings; }

FrameMotion MotionGenerator::next() {
    Impl& s = *impl_;
    const SceneSpec& spec = s.spec;
    const int f = s.next_frame;
    Mask occlusion(spec.width, spec.height);

    if (auto* fluid = std::get_if<sim::FluidState>(&s.state)) {
        sim::FluidStepResult r = sim::fluid_step(*fluid);
        if (!r.converged) {
            char msg[160];
            std::snprintf(msg, sizeof msg, "frame %d: pressure solve stopped at %d iterations (max |div| %.3g)", f,
                          r.pressure_iterations, r.max_divergence);
            s.warnings.emplace_back(msg);
        }
        *fluid = std::move(r.state);
        s.last_forward = std::move(r.flow);
    } else if (auto* boids = std::get_if<sim::BoidsState>(&s.state)) {
        const auto& cfg = std::get<BoidsScene>(spec.simulator);
        sim::BoidsStepResult r = sim::boids_step(*boids);
        s.last_forward = sim::rasterize_agent_flow(r.motions, cfg.patch_radius, spec.width, spec.height);
        *boids = std::move(r.state);
    } else {
        const auto& rigid = std::get<sim::RigidFlow>(s.state);
        s.last_forward = rigid.flow;
        occlusion = rigid.occlusion;
    }

    const FlowField latent_flow = resample_flow(invert_flow(s.last_forward), spec.latent_factor);
    EtaMap eta = derive_eta_map(latent_flow, spec.eta.threshold);
    const Mask forced = spec.eta.occlusion ? mask_union(s.user_mask, occlusion) : s.user_mask;
    eta = merge_eta_mask(eta, downsample_mask(forced, spec.latent_factor));
    ++s.next_frame;
    return {latent_flow, std::move(eta)};
}

std::string numbered(const char* prefix, int index, const char* extension) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04d.%s", prefix, index, extension);
    return buf;
}

Manifest run_scene(const SceneSpec& spec, const std::filesystem::path& output_dir) {
    ensure_dir(output_dir);
    Manifest manifest = manifest_header(spec);
    MotionGenerator gen(spec);
    for (int f = 1; f < spec.frames; ++f) {
        const FrameMotion m = gen.next();
        manifest.files.push_back(write_entry(output_dir, numbered("flow", f, "flo"), io::encode_flo(m.flow), "flow"));
        manifest.files.push_back(write_entry(output_dir, numbered("eta", f, "npy"), io::encode_npy(m.eta), "eta"));
    }
    manifest.warnings = gen.warnings();
    write_manifest(output_dir, manifest);
    return manifest;
}

std::string metrics_report_json(const MotionConsistencyReport& report) {
    const nlohmann::json doc = {{"per_pair", report.per_pair}, {"mean", report.mean}};
    return doc.dump(2) + "\n";
}

ToyRunResult run_toy_pipeline(const SceneSpec& spec, const TensorGrid& first_frame,
                              const std::filesystem::path& output_dir) {
    if (first_frame.width() != spec.latent_width() || first_frame.height() != spec.latent_height()) {
        throw ValidationError("toy-run: first frame is " + std::to_string(first_frame.width()) + "x" +
                              std::to_string(first_frame.height()) + ", expected the latent size " +
                              std::to_string(spec.latent_width()) + "x" + std::to_string(spec.latent_height()));
    }
    ensure_dir(output_dir);
    const NoiseSchedule schedule = make_schedule(spec.schedule);
    const AnalyticGaussianDenoiser denoiser(schedule, first_frame, spec.toy.prior_s, spec.toy.negative_shift);
    const IdentityCodec codec;

    ToyRunResult result;
    result.manifest = manifest_header(spec);
    MotionGenerator gen(spec);
    const auto summary = generate_video_streaming(
        first_frame, spec.frames,
        [&](int f) {
            if (f != gen.next_frame()) throw RuntimeError("toy-run: frames requested out of order");
            return gen.next();
        },
        denoiser, codec, schedule, spec.sampler,
        [&](int f, const TensorGrid& frame) {
            result.frames.push_back(frame);
            const std::string name = numbered("frame", f, "png");
            io::write_png(output_dir / name, frame);
            const std::string bytes = io::read_file(output_dir / name);
            result.manifest.files.push_back({name, sha256_hex(bytes), bytes.size(), "frame"});
        });
    result.clamped = summary.clamped;

    nlohmann::json metrics = {{"frames", spec.frames}, {"variance_clamped", summary.clamped}};
    if (result.frames.size() >= 2 && first_frame.width() >= 16 && first_frame.height() >= 16) {
        result.motion_consistency = motion_consistency_report(result.frames, HornSchunckEstimator());
        metrics["motion_consistency"] = {{"per_pair", result.motion_consistency->per_pair},
                                         {"mean", result.motion_consistency->mean}};
    } else {
        metrics["motion_consistency"] = nullptr;
    }
    result.manifest.files.push_back(write_entry(output_dir, "metrics.json", metrics.dump(2) + "\n", "report"));
    result.manifest.warnings = gen.warnings();
    if (summary.clamped) result.manifest.warnings.emplace_back("a sampler step clamped a negative variance term");
    write_manifest(output_dir, result.manifest);
    return result;
}

ToyRunResult run_toy_pipeline(const SceneSpec& spec, const std::filesystem::path& first_frame_path,
                              const std::filesystem::path& output_dir) {
    const std::string ext = first_frame_path.extension().string();
    const TensorGrid frame = ext == ".npy" ? io::read_npy_grid(first_frame_path) : io::read_png(first_frame_path);
    return run_toy_pipeline(spec, frame, output_dir);
}

} // namespace flowgen::scene
