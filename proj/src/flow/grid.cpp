#include "flowgen/flow/grid.hpp"

#include "flowgen/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace flowgen {

namespace {

void require_positive_dims(int width, int height, const char* what) {
    if (width <= 0 || height <= 0) {
        throw ValidationError(std::string(what) + ": dimensions must be positive, got " +
                              std::to_string(width) + "x" + std::to_string(height));
    }
}

bool finite_range(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

} // namespace

TensorGrid::TensorGrid(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
    require_positive_dims(width, height, "TensorGrid");
    if (channels <= 0) throw ValidationError("TensorGrid: channel count must be positive");
    if (!std::isfinite(fill)) throw ValidationError("TensorGrid: fill value must be finite");
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

TensorGrid::TensorGrid(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    require_positive_dims(width, height, "TensorGrid");
    if (channels <= 0) throw ValidationError("TensorGrid: channel count must be positive");
    if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
        throw ValidationError("TensorGrid: data length " + std::to_string(data_.size()) +
                              " does not match " + std::to_string(width) + "x" +
                              std::to_string(height) + "x" + std::to_string(channels));
    }
    if (!finite_range(data_)) throw ValidationError("TensorGrid: data contains non-finite values");
}

bool TensorGrid::all_finite() const { return finite_range(data_); }

const char* to_string(FlowConvention convention) {
    return convention == FlowConvention::backward ? "backward" : "forward";
}

FlowField::FlowField(int width, int height, FlowConvention convention)
    : width_(width), height_(height), convention_(convention) {
    require_positive_dims(width, height, "FlowField");
    u_.assign(static_cast<std::size_t>(width) * height, 0.0);
    v_.assign(u_.size(), 0.0);
}

FlowField::FlowField(int width, int height, FlowConvention convention,
                     std::vector<double> u, std::vector<double> v)
    : width_(width), height_(height), convention_(convention), u_(std::move(u)), v_(std::move(v)) {
    require_positive_dims(width, height, "FlowField");
    const auto n = static_cast<std::size_t>(width) * height;
    if (u_.size() != n || v_.size() != n) {
        throw ValidationError("FlowField: component arrays must hold exactly width*height entries");
    }
    if (!finite_range(u_) || !finite_range(v_)) {
        throw ValidationError("FlowField: non-finite displacement");
    }
}

FlowField FlowField::constant(int width, int height, FlowConvention convention, double u, double v) {
    const auto n = static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0);
    return FlowField(width, height, convention, std::vector<double>(n, u), std::vector<double>(n, v));
}

void FlowField::set(int x, int y, double u, double v) {
    if (!std::isfinite(u) || !std::isfinite(v)) {
        throw ValidationError("FlowField: non-finite displacement at (" + std::to_string(x) + ", " +
                              std::to_string(y) + ")");
    }
    u_[offset(x, y)] = u;
    v_[offset(x, y)] = v;
}

EtaMap::EtaMap(int width, int height, double fill) : width_(width), height_(height) {
    require_positive_dims(width, height, "EtaMap");
    if (!(fill >= 0.0 && fill <= 1.0)) throw ValidationError("EtaMap: eta must lie in [0, 1]");
    values_.assign(static_cast<std::size_t>(width) * height, fill);
}

EtaMap::EtaMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
    require_positive_dims(width, height, "EtaMap");
    if (values_.size() != static_cast<std::size_t>(width) * height) {
        throw ValidationError("EtaMap: value count does not match dimensions");
    }
    for (double eta : values_) {
        if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("EtaMap: eta must lie in [0, 1]");
    }
}

void EtaMap::set(int x, int y, double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("EtaMap: eta must lie in [0, 1]");
    values_[static_cast<std::size_t>(y) * width_ + x] = eta;
}

Mask::Mask(int width, int height, bool fill) : width_(width), height_(height) {
    require_positive_dims(width, height, "Mask");
    bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t Mask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

} // namespace flowgen
