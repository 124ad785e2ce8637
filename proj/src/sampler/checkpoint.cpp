#include "flowgen/error.hpp"
#include "flowgen/flow/io.hpp"
#include "flowgen/sampler/pipeline.hpp"

#include <array>
#include <cstring>

namespace flowgen {

namespace {

constexpr std::array<char, 8> kMagic = {'F', 'G', 'C', 'K', 'P', 'T', '\r', '\n'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
    }
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        std::uint64_t value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            value |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(T);
        return static_cast<T>(value);
    }

    std::string_view take(std::size_t n) {
        need(n);
        const auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw ValidationError("checkpoint: truncated blob");
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::string encode_checkpoint(const LoopState& state) {
    std::string out(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, state.seed);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(state.next_frame));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(state.frame_count));
    put<std::uint32_t>(out, 2);
    for (const TensorGrid* grid : {&state.first_latent, &state.previous_frame}) {
        const std::string npy = io::encode_npy_f64(*grid);
        put<std::uint64_t>(out, npy.size());
        out += npy;
    }
    return out;
}

LoopState decode_checkpoint(std::string_view bytes) {
    Reader in(bytes);
    if (in.take(kMagic.size()) != std::string_view(kMagic.data(), kMagic.size())) {
        throw ValidationError("checkpoint: bad magic");
    }
    const auto version = in.get<std::uint32_t>();
    if (version != kVersion) {
        throw ValidationError("checkpoint: unsupported version " + std::to_string(version));
    }
    LoopState state;
    state.seed = in.get<std::uint64_t>();
    state.next_frame = static_cast<std::int32_t>(in.get<std::uint32_t>());
    state.frame_count = static_cast<std::int32_t>(in.get<std::uint32_t>());
    if (state.next_frame < 1 || state.frame_count < state.next_frame - 1) {
        throw ValidationError("checkpoint: inconsistent frame counters");
    }
    if (in.get<std::uint32_t>() != 2) throw ValidationError("checkpoint: expected two tensors");
    state.first_latent = io::decode_npy_grid(in.take(in.get<std::uint64_t>()));
    state.previous_frame = io::decode_npy_grid(in.take(in.get<std::uint64_t>()));
    if (!in.done()) throw ValidationError("checkpoint: trailing bytes");
    return state;
}

} // namespace flowgen
