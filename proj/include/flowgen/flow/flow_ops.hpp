#pragma once

#include "flowgen/flow/grid.hpp"

#include <cstddef>
#include <span>

namespace flowgen {

enum class Boundary {
    /// Out-of-range sample coordinates are clamped to the grid (edge replication).
    clamp,
    /// Taps that fall outside the grid read zero.
    zero,
};

/// Bilinear sample of channel `c` at continuous pixel coordinates (pixel centres
/// sit at integer coordinates).
double sample_bilinear(const TensorGrid& grid, double x, double y, int c, Boundary boundary);

/// output(x, y, c) = grid sampled at (x - u(x, y), y - v(x, y)).
/// Throws ValidationError on dimension mismatch or a forward-convention flow.
TensorGrid warp_backward(const TensorGrid& grid, const FlowField& flow,
                         Boundary boundary = Boundary::clamp);

/// Converts a forward (velocity-like) field into a backward field by bilinear
/// splatting each source vector at its destination. Pixels that receive no
/// weight copy the value of the nearest covered pixel (breadth-first, 4-connected).
FlowField invert_flow(const FlowField& forward);

/// Block-averages `factor`x`factor` cells and divides magnitudes by `factor`, so the
/// result is expressed in pixels of the coarse grid.
FlowField resample_flow(const FlowField& flow, int factor);

/// Max-pools a mask onto a grid `factor` times smaller.
Mask downsample_mask(const Mask& mask, int factor);

/// Rule-based Spatial-eta map for a backward flow: 1 where the sample point leaves
/// [0, W-1] x [0, H-1] or where any 4-neighbour differs by more than
/// `discontinuity_threshold` in u or v; 0 elsewhere.
EtaMap derive_eta_map(const FlowField& flow, double discontinuity_threshold = 1.0);

/// Sets eta = 1 wherever `mask` is set. Dimensions must match.
EtaMap merge_eta_mask(const EtaMap& eta, const Mask& mask);

struct FlowCorrelation {
    double value = 0.0;
    /// False when no pixel has both vectors non-zero; `value` is then 0.
    bool defined = false;
    std::size_t valid_pixels = 0;
};

/// Mean cosine of the angle between `a` and `b` over pixels where both are non-zero.
FlowCorrelation flow_cosine_correlation(const FlowField& a, const FlowField& b);

/// Per-pixel cosine used by flow_cosine_correlation (0 where undefined),
/// returned as a single-channel grid.
TensorGrid flow_cosine_map(const FlowField& a, const FlowField& b);

struct PixelBox {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
};

struct PixelPos {
    int x = 0;
    int y = 0;
};

/// Pastes the `source` patch centred on each target (top-left at
/// target - (width/2, height/2)), in order, clipping at the grid border.
/// The patch is read from the unmodified input, so pastes never chain.
TensorGrid clone_patch(const TensorGrid& grid, PixelBox source, std::span<const PixelPos> targets);

} // namespace flowgen
