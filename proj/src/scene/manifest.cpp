#include "flowgen/scene/manifest.hpp"

#include "flowgen/error.hpp"
#include "flowgen/flow/io.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <array>
#include <memory>

namespace flowgen::scene {

using nlohmann::json;

std::string sha256_hex(std::string_view bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &length) != 1) {
        throw RuntimeError("sha256: OpenSSL digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 15]);
    }
    return out;
}

std::string manifest_to_json(const Manifest& m) {
    json files = json::array();
    for (const auto& f : m.files) {
        files.push_back({{"path", f.path}, {"kind", f.kind}, {"bytes", f.bytes}, {"sha256", f.sha256}});
    }
    const json doc = {
        {"format", kManifestFormat},
        {"tool_version", kToolVersion},
        {"scene", m.scene},
        {"spec_sha256", m.spec_sha256},
        {"simulator", m.simulator},
        {"canvas", {{"width", m.width}, {"height", m.height}}},
        {"latent", {{"width", m.latent_width}, {"height", m.latent_height}}},
        {"frames", m.frames},
        {"seed", m.seed},
        {"files", files},
        {"warnings", m.warnings},
    };
    return doc.dump(2) + "\n";
}

Manifest manifest_from_json(std::string_view text) {
    try {
        const json doc = json::parse(text);
        if (doc.at("format").get<int>() != kManifestFormat) {
            throw ValidationError("manifest: unsupported format " + doc.at("format").dump());
        }
        Manifest m;
        m.scene = doc.at("scene").get<std::string>();
        m.spec_sha256 = doc.at("spec_sha256").get<std::string>();
        m.simulator = doc.at("simulator").get<std::string>();
        m.width = doc.at("canvas").at("width").get<int>();
        m.height = doc.at("canvas").at("height").get<int>();
        m.latent_width = doc.at("latent").at("width").get<int>();
        m.latent_height = doc.at("latent").at("height").get<int>();
        m.frames = doc.at("frames").get<int>();
        m.seed = doc.at("seed").get<std::uint64_t>();
        for (const auto& f : doc.at("files")) {
            m.files.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                               f.at("bytes").get<std::uint64_t>(), f.at("kind").get<std::string>()});
        }
        m.warnings = doc.value("warnings", std::vector<std::string>{});
        return m;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("manifest: ") + e.what());
    }
}

void write_manifest(const std::filesystem::path& dir, const Manifest& manifest) {
    io::write_file_atomic(dir / "manifest.json", manifest_to_json(manifest));
}

VerifyResult verify_manifest(const std::filesystem::path& manifest_path) {
    const Manifest m = manifest_from_json(io::read_file(manifest_path));
    const std::filesystem::path dir = manifest_path.parent_path();
    VerifyResult result;
    for (const auto& f : m.files) {
        const std::filesystem::path rel(f.path);
        if (rel.is_absolute() || rel.lexically_normal().string().starts_with("..")) {
            result.problems.push_back(f.path + ": path escapes the manifest directory");
            continue;
        }
        const auto path = dir / rel;
        if (!std::filesystem::exists(path)) {
            result.problems.push_back(f.path + ": missing");
            continue;
        }
        const std::string bytes = io::read_file(path);
        if (bytes.size() != f.bytes) {
            result.problems.push_back(f.path + ": size " + std::to_string(bytes.size()) + " != recorded " +
                                      std::to_string(f.bytes));
        } else if (sha256_hex(bytes) != f.sha256) {
            result.problems.push_back(f.path + ": checksum mismatch");
        }
    }
    result.ok = result.problems.empty();
    return result;
}

} // namespace flowgen::scene
