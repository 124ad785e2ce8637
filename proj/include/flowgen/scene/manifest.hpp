#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace flowgen::scene {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kManifestFormat = 1;

std::string sha256_hex(std::string_view bytes);

struct ManifestEntry {
    /// Relative to the manifest's directory.
    std::string path;
    std::string sha256;
    std::uint64_t bytes = 0;
    /// "flow", "eta", "frame" or "report".
    std::string kind;
};

struct Manifest {
    std::string scene;
    std::string spec_sha256;
    std::string simulator;
    int width = 0;
    int height = 0;
    int latent_width = 0;
    int latent_height = 0;
    int frames = 0;
    std::uint64_t seed = 0;
    std::vector<ManifestEntry> files;
    /// Free-form notes recorded during the run (e.g. unconverged pressure solves).
    std::vector<std::string> warnings;
};

std::string manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(std::string_view text);
/// Written atomically as <dir>/manifest.json.
void write_manifest(const std::filesystem::path& dir, const Manifest& manifest);

struct VerifyResult {
    bool ok = true;
    /// One line per missing or altered file.
    std::vector<std::string> problems;
};

/// Recomputes every listed checksum relative to the manifest's directory.
VerifyResult verify_manifest(const std::filesystem::path& manifest_path);

} // namespace flowgen::scene
