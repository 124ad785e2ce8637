#pragma once

#include <array>
#include <cstdint>

namespace flowgen {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3"): maps a 128-bit counter and a 64-bit key to 128 random bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Stateless counter-based stream. A stream is identified by a 64-bit key and a
/// 64-bit stream id; element k of the stream is a pure function of
/// (key, stream id, k), so draws can be taken in any order or in parallel.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

    /// Child stream whose id mixes this stream's id with `a` and `b`;
    /// the seed is kept.
    CounterRng substream(std::uint64_t a, std::uint64_t b = 0) const;

    std::array<std::uint32_t, 4> block(std::uint64_t index) const;
    /// Uniform double in (0, 1) built from 53 random bits of block `index`.
    double uniform(std::uint64_t index) const;
    /// Standard normal via Box-Muller on the two 53-bit halves of block `index`.
    double normal(std::uint64_t index) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
};

} // namespace flowgen
