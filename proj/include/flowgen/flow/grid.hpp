#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace flowgen {

/// Multi-channel 2D grid of reals. Storage is row-major and
/// channel-interleaved: element (x, y, c) lives at ((y * width + x) * channels + c),
/// which is also the memory order of an NPY array of shape (height, width, channels).
class TensorGrid {
public:
    TensorGrid() = default;
    TensorGrid(int width, int height, int channels, double fill = 0.0);
    TensorGrid(int width, int height, int channels, std::vector<double> data);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const { return data_.empty(); }

    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }
    double at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }
    double& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    bool same_shape(const TensorGrid& other) const {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }
    bool all_finite() const;

    friend bool operator==(const TensorGrid&, const TensorGrid&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

enum class FlowConvention {
    /// Vector at a target pixel; warping samples the source at (x - u, y - v).
    backward,
    /// Vector at a source pixel; the content at (x, y) moves to (x + u, y + v).
    forward,
};

const char* to_string(FlowConvention convention);

/// Dense 2D displacement field in px/frame (u rightward, v downward).
/// The convention tag is fixed at construction.
class FlowField {
public:
    FlowField() = default;
    FlowField(int width, int height, FlowConvention convention);
    FlowField(int width, int height, FlowConvention convention,
              std::vector<double> u, std::vector<double> v);

    static FlowField constant(int width, int height, FlowConvention convention, double u, double v);

    int width() const { return width_; }
    int height() const { return height_; }
    FlowConvention convention() const { return convention_; }
    std::size_t pixel_count() const { return u_.size(); }

    double u(int x, int y) const { return u_[offset(x, y)]; }
    double v(int x, int y) const { return v_[offset(x, y)]; }
    /// Throws ValidationError on non-finite input.
    void set(int x, int y, double u, double v);

    std::span<const double> u_data() const { return u_; }
    std::span<const double> v_data() const { return v_; }

    bool same_dims(const FlowField& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const FlowField&, const FlowField&) = default;

private:
    std::size_t offset(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

    int width_ = 0;
    int height_ = 0;
    FlowConvention convention_ = FlowConvention::backward;
    std::vector<double> u_;
    std::vector<double> v_;
};

/// Per-pixel DDIM/DDPM blend factor, every value in [0, 1].
class EtaMap {
public:
    EtaMap() = default;
    EtaMap(int width, int height, double fill = 0.0);
    EtaMap(int width, int height, std::vector<double> values);

    static EtaMap uniform(int width, int height, double eta) { return EtaMap(width, height, eta); }

    int width() const { return width_; }
    int height() const { return height_; }
    double at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
    void set(int x, int y, double eta);
    std::span<const double> values() const { return values_; }

    friend bool operator==(const EtaMap&, const EtaMap&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> values_;
};

/// Boolean per-pixel mask (obstacles, smoke sources, occlusion, user η hints).
class Mask {
public:
    Mask() = default;
    Mask(int width, int height, bool fill = false);

    int width() const { return width_; }
    int height() const { return height_; }
    bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(int x, int y, bool value) { bits_[static_cast<std::size_t>(y) * width_ + x] = value ? 1 : 0; }
    std::size_t count() const;
    bool same_dims(const Mask& other) const { return width_ == other.width_ && height_ == other.height_; }

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

} // namespace flowgen
