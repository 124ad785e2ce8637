// flowgen command-line front end.
//
//   flowgen simulate <spec.json> -o <dir> [--verify]
//   flowgen toy-run <spec.json> <frame.png> -o <dir>
//   flowgen metrics <dir> [--report out.json]
//   flowgen flo info <file.flo>
//   flowgen flo diff <a.flo> <b.flo>
//   flowgen verify <manifest.json>
//
// Exit codes: 0 success, 2 invalid input, 3 runtime failure.
// FLOWGEN_LOG_LEVEL selects the log level (trace, debug, info, warn, error, off).

#include "flowgen/error.hpp"
#include "flowgen/flow/io.hpp"
#include "flowgen/metrics/metrics.hpp"
#include "flowgen/scene/runner.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <regex>

namespace fs = std::filesystem;
using namespace flowgen;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("flowgen");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("FLOWGEN_LOG_LEVEL")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to "off"; only accept it when asked for.
        if (level != spdlog::level::off || std::string_view(env) == "off") {
            spdlog::set_level(level);
        } else {
            spdlog::warn("ignoring unknown FLOWGEN_LOG_LEVEL '{}'", env);
        }
    }
}

int report_verify(const scene::VerifyResult& r) {
    for (const auto& p : r.problems) spdlog::error("{}", p);
    if (!r.ok) return kExitValidation;
    spdlog::info("all checksums match");
    return 0;
}

int cmd_simulate(const fs::path& spec_path, const fs::path& out, bool verify) {
    const scene::SceneSpec spec = scene::load_scene(spec_path);
    spdlog::info("scene '{}': {} simulator, {}x{} canvas, {} frames", spec.name, scene::simulator_name(spec.simulator),
                 spec.width, spec.height, spec.frames);
    const scene::Manifest m = scene::run_scene(spec, out);
    for (const auto& w : m.warnings) spdlog::warn("{}", w);
    spdlog::info("wrote {} files to {}", m.files.size() + 1, out.string());
    return verify ? report_verify(scene::verify_manifest(out / "manifest.json")) : 0;
}

int cmd_toy_run(const fs::path& spec_path, const fs::path& frame, const fs::path& out) {
    const scene::SceneSpec spec = scene::load_scene(spec_path);
    const scene::ToyRunResult r = scene::run_toy_pipeline(spec, frame, out);
    for (const auto& w : r.manifest.warnings) spdlog::warn("{}", w);
    if (r.motion_consistency) spdlog::info("motion consistency {:.4f}", r.motion_consistency->mean);
    spdlog::info("wrote {} frames to {}", r.frames.size(), out.string());
    return 0;
}

// Numbered frames: the trailing integer in the file stem orders them.
std::vector<TensorGrid> load_frames(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ValidationError("'" + dir.string() + "' is not a directory");
    const std::regex numbered(R"((.*?)(\d+))");
    std::vector<std::pair<long long, fs::path>> png, npy;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string stem = entry.path().stem().string();
        std::smatch match;
        if (!std::regex_match(stem, match, numbered)) continue;
        const long long index = std::stoll(match[2].str());
        const std::string ext = entry.path().extension().string();
        if (ext == ".png") png.emplace_back(index, entry.path());
        else if (ext == ".npy") npy.emplace_back(index, entry.path());
    }
    auto& chosen = png.empty() ? npy : png;
    std::sort(chosen.begin(), chosen.end());
    std::vector<TensorGrid> frames;
    for (const auto& [_, path] : chosen) {
        frames.push_back(path.extension() == ".png" ? io::read_png(path) : io::read_npy_grid(path));
    }
    if (frames.size() < 2) throw ValidationError("'" + dir.string() + "' holds fewer than two numbered frames");
    return frames;
}

int cmd_metrics(const fs::path& dir, const std::string& report_path) {
    const auto frames = load_frames(dir);
    const auto report = motion_consistency_report(frames, HornSchunckEstimator());
    const std::string json = scene::metrics_report_json(report);
    if (report_path.empty()) {
        std::cout << json;
    } else {
        io::write_file_atomic(report_path, json);
        spdlog::info("motion consistency {:.4f} over {} pairs -> {}", report.mean, report.per_pair.size(), report_path);
    }
    return 0;
}

int cmd_flo_info(const fs::path& file) {
    const FlowField f = io::read_flo(file);
    double max_mag = 0.0, sum_mag = 0.0, sum_u = 0.0, sum_v = 0.0;
    for (std::size_t i = 0; i < f.pixel_count(); ++i) {
        const double m = std::hypot(f.u_data()[i], f.v_data()[i]);
        max_mag = std::max(max_mag, m);
        sum_mag += m;
        sum_u += f.u_data()[i];
        sum_v += f.v_data()[i];
    }
    const double n = static_cast<double>(f.pixel_count());
    std::cout << "size " << f.width() << "x" << f.height() << "\n"
              << "mean_u " << sum_u / n << "\n"
              << "mean_v " << sum_v / n << "\n"
              << "mean_magnitude " << sum_mag / n << "\n"
              << "max_magnitude " << max_mag << "\n";
    return 0;
}

int cmd_flo_diff(const fs::path& a, const fs::path& b) {
    const FlowField fa = io::read_flo(a);
    const FlowField fb = io::read_flo(b);
    if (!fa.same_dims(fb)) throw ValidationError("flow files differ in size");
    double max_epe = 0.0, sum_epe = 0.0;
    for (std::size_t i = 0; i < fa.pixel_count(); ++i) {
        const double e = std::hypot(fa.u_data()[i] - fb.u_data()[i], fa.v_data()[i] - fb.v_data()[i]);
        max_epe = std::max(max_epe, e);
        sum_epe += e;
    }
    std::cout << "mean_epe " << sum_epe / static_cast<double>(fa.pixel_count()) << "\n"
              << "max_epe " << max_epe << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    configure_logging();

    CLI::App app{"Physics-driven optical flow and diffusion-sampler toolkit"};
    app.require_subcommand(1);

    fs::path sim_spec, sim_out;
    bool sim_verify = false;
    auto* simulate = app.add_subcommand("simulate", "Run a scene and write flows, eta maps and a manifest");
    simulate->add_option("spec", sim_spec, "Scene JSON")->required();
    simulate->add_option("-o,--output", sim_out, "Output directory")->required();
    simulate->add_flag("--verify", sim_verify, "Re-read and check every output after writing");

    fs::path toy_spec, toy_frame, toy_out;
    auto* toy = app.add_subcommand("toy-run", "Generate frames with the identity codec and analytic denoiser");
    toy->add_option("spec", toy_spec, "Scene JSON")->required();
    toy->add_option("frame", toy_frame, "First frame (.png or .npy) at latent resolution")->required();
    toy->add_option("-o,--output", toy_out, "Output directory")->required();

    fs::path metrics_dir;
    std::string metrics_report;
    auto* metrics = app.add_subcommand("metrics", "Motion consistency of a directory of numbered frames");
    metrics->add_option("dir", metrics_dir, "Frame directory")->required();
    metrics->add_option("--report", metrics_report, "Write the JSON report here instead of stdout");

    auto* flo = app.add_subcommand("flo", "Inspect .flo files");
    flo->require_subcommand(1);
    fs::path info_file, diff_a, diff_b;
    auto* flo_info = flo->add_subcommand("info", "Print size and magnitude statistics");
    flo_info->add_option("file", info_file)->required();
    auto* flo_diff = flo->add_subcommand("diff", "Endpoint error between two flow files");
    flo_diff->add_option("a", diff_a)->required();
    flo_diff->add_option("b", diff_b)->required();

    fs::path manifest_path;
    auto* verify = app.add_subcommand("verify", "Check the checksums listed in a manifest");
    verify->add_option("manifest", manifest_path, "manifest.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*simulate) return cmd_simulate(sim_spec, sim_out, sim_verify);
        if (*toy) return cmd_toy_run(toy_spec, toy_frame, toy_out);
        if (*metrics) return cmd_metrics(metrics_dir, metrics_report);
        if (*flo_info) return cmd_flo_info(info_file);
        if (*flo_diff) return cmd_flo_diff(diff_a, diff_b);
        if (*verify) return report_verify(scene::verify_manifest(manifest_path));
    } catch (const ValidationError& e) {
        spdlog::error("{}", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitRuntime;
    }
    return 0;
}
