#pragma once

#include "flowgen/flow/grid.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace flowgen::io {

/// Middlebury .flo: float32 magic 202021.25, int32 width, int32 height, then
/// row-major interleaved float32 (u, v), all little-endian. The file does not
/// record a convention, so the reader takes it as a parameter.
std::string encode_flo(const FlowField& flow);
FlowField decode_flo(std::string_view bytes, FlowConvention convention = FlowConvention::backward);
void write_flo(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flo(const std::filesystem::path& path,
                   FlowConvention convention = FlowConvention::backward);

/// NPY 1.0, little-endian float32, C order. Grids are written with shape
/// (height, width, channels), eta maps with shape (height, width).
/// Readers accept float32 or float64 and, for grids, 2-D arrays as one channel.
std::string encode_npy(const TensorGrid& grid);
std::string encode_npy(const EtaMap& eta);
/// Lossless variant storing '<f8'.
std::string encode_npy_f64(const TensorGrid& grid);
TensorGrid decode_npy_grid(std::string_view bytes);
EtaMap decode_npy_eta(std::string_view bytes);
void write_npy(const std::filesystem::path& path, const TensorGrid& grid);
void write_npy(const std::filesystem::path& path, const EtaMap& eta);
TensorGrid read_npy_grid(const std::filesystem::path& path);
EtaMap read_npy_eta(const std::filesystem::path& path);

/// 8-bit PNG <-> grid with values in [0, 1]. Grayscale files load as one
/// channel, everything else as RGB (alpha dropped). Writing clamps to [0, 1]
/// and accepts 1, 3 or 4 channels.
TensorGrid read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const TensorGrid& image);

/// Loads a mask from .npy or .png; any non-zero value (any channel) is set.
Mask read_mask(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

} // namespace flowgen::io
