#pragma once

#include "flowgen/flow/grid.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

namespace testsupport {

inline flowgen::TensorGrid random_grid(std::mt19937_64& g, int w, int h, int c, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    flowgen::TensorGrid out(w, h, c);
    for (double& v : out.data()) v = u(g);
    return out;
}

inline flowgen::TensorGrid normal_grid(std::mt19937_64& g, int w, int h, int c, double mean = 0.0, double sd = 1.0) {
    std::normal_distribution<double> n(mean, sd);
    flowgen::TensorGrid out(w, h, c);
    for (double& v : out.data()) v = n(g);
    return out;
}

// Sum of eight random plane waves, values near [0.1, 0.9]. Content is sampled at
// (x - dx, y - dy), so (dx, dy) > 0 moves it right and down.
inline flowgen::TensorGrid smooth_texture(int w, int h, int channels, unsigned seed, double dx = 0.0,
                                          double dy = 0.0) {
    std::mt19937 g(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves;
    for (int c = 0; c < channels; ++c) {
        for (int i = 0; i < 8; ++i) {
            waves.push_back({(u(g) * 2 - 1) * 0.25, (u(g) * 2 - 1) * 0.25, u(g) * 6.283185307179586, u(g)});
        }
    }
    flowgen::TensorGrid t(w, h, channels);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                double s = 0.0;
                for (int i = 0; i < 8; ++i) {
                    const Wave& wv = waves[static_cast<std::size_t>(c) * 8 + i];
                    s += wv.amp * std::sin(wv.fx * (x - dx) + wv.fy * (y - dy) + wv.phase);
                }
                t.at(x, y, c) = 0.5 + 0.1 * s;
            }
        }
    }
    return t;
}

inline double relative_l2(const flowgen::TensorGrid& a, const flowgen::TensorGrid& reference) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a.data()[k] - reference.data()[k];
        num += d * d;
        den += reference.data()[k] * reference.data()[k];
    }
    return std::sqrt(num / den);
}

inline double max_abs_diff(const flowgen::TensorGrid& a, const flowgen::TensorGrid& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
    return m;
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("flowgen_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace testsupport
