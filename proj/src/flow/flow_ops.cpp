#include "flowgen/flow/flow_ops.hpp"

#include "flowgen/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <vector>

namespace flowgen {

namespace {

std::string dims(int w, int h) { return std::to_string(w) + "x" + std::to_string(h); }

} // namespace

double sample_bilinear(const TensorGrid& grid, double x, double y, int c, Boundary boundary) {
    const int w = grid.width();
    const int h = grid.height();
    if (boundary == Boundary::clamp) {
        x = std::clamp(x, 0.0, static_cast<double>(w - 1));
        y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    }
    const double fx0 = std::floor(x);
    const double fy0 = std::floor(y);
    const double ax = x - fx0;
    const double ay = y - fy0;
    const int x0 = static_cast<int>(fx0);
    const int y0 = static_cast<int>(fy0);

    auto tap = [&](int xi, int yi) -> double {
        if (xi < 0 || yi < 0 || xi >= w || yi >= h) {
            if (boundary == Boundary::zero) return 0.0;
            xi = std::clamp(xi, 0, w - 1);
            yi = std::clamp(yi, 0, h - 1);
        }
        return grid.at(xi, yi, c);
    };

    return (1.0 - ax) * (1.0 - ay) * tap(x0, y0) + ax * (1.0 - ay) * tap(x0 + 1, y0) +
           (1.0 - ax) * ay * tap(x0, y0 + 1) + ax * ay * tap(x0 + 1, y0 + 1);
}

TensorGrid warp_backward(const TensorGrid& grid, const FlowField& flow, Boundary boundary) {
    if (flow.convention() != FlowConvention::backward) {
        throw ValidationError("warp_backward: flow must use the backward convention (invert it first)");
    }
    if (flow.width() != grid.width() || flow.height() != grid.height()) {
        throw ValidationError("warp_backward: flow " + dims(flow.width(), flow.height()) +
                              " does not match grid " + dims(grid.width(), grid.height()));
    }
    TensorGrid out(grid.width(), grid.height(), grid.channels());
    for (int y = 0; y < grid.height(); ++y) {
        for (int x = 0; x < grid.width(); ++x) {
            const double sx = x - flow.u(x, y);
            const double sy = y - flow.v(x, y);
            for (int c = 0; c < grid.channels(); ++c) {
                out.at(x, y, c) = sample_bilinear(grid, sx, sy, c, boundary);
            }
        }
    }
    return out;
}

FlowField invert_flow(const FlowField& forward) {
    if (forward.convention() != FlowConvention::forward) {
        throw ValidationError("invert_flow: expected a forward-convention flow");
    }
    const int w = forward.width();
    const int h = forward.height();
    const std::size_t n = forward.pixel_count();
    std::vector<double> acc_u(n, 0.0), acc_v(n, 0.0), weight(n, 0.0);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double fu = forward.u(x, y);
            const double fv = forward.v(x, y);
            const double tx = x + fu;
            const double ty = y + fv;
            const double fx0 = std::floor(tx);
            const double fy0 = std::floor(ty);
            const double ax = tx - fx0;
            const double ay = ty - fy0;
            const int x0 = static_cast<int>(fx0);
            const int y0 = static_cast<int>(fy0);
            const double wts[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
            const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
            const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
            for (int k = 0; k < 4; ++k) {
                if (wts[k] <= 0.0 || xs[k] < 0 || ys[k] < 0 || xs[k] >= w || ys[k] >= h) continue;
                const std::size_t i = static_cast<std::size_t>(ys[k]) * w + xs[k];
                acc_u[i] += wts[k] * fu;
                acc_v[i] += wts[k] * fv;
                weight[i] += wts[k];
            }
        }
    }

    constexpr double kMinWeight = 1e-9;
    std::vector<double> out_u(n, 0.0), out_v(n, 0.0);
    std::vector<char> known(n, 0);
    std::deque<std::size_t> frontier;
    for (std::size_t i = 0; i < n; ++i) {
        if (weight[i] > kMinWeight) {
            out_u[i] = acc_u[i] / weight[i];
            out_v[i] = acc_v[i] / weight[i];
            known[i] = 1;
            frontier.push_back(i);
        }
    }
    // Nothing landed inside the grid: there is no meaningful inverse, keep zeros.
    if (!frontier.empty()) {
        while (!frontier.empty()) {
            const std::size_t i = frontier.front();
            frontier.pop_front();
            const int x = static_cast<int>(i % w);
            const int y = static_cast<int>(i / w);
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int k = 0; k < 4; ++k) {
                if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
                const std::size_t j = static_cast<std::size_t>(ny[k]) * w + nx[k];
                if (known[j]) continue;
                known[j] = 1;
                out_u[j] = out_u[i];
                out_v[j] = out_v[i];
                frontier.push_back(j);
            }
        }
    }
    return FlowField(w, h, FlowConvention::backward, std::move(out_u), std::move(out_v));
}

FlowField resample_flow(const FlowField& flow, int factor) {
    if (factor <= 0) throw ValidationError("resample_flow: factor must be positive");
    if (flow.width() % factor != 0 || flow.height() % factor != 0) {
        throw ValidationError("resample_flow: " + dims(flow.width(), flow.height()) +
                              " is not divisible by factor " + std::to_string(factor));
    }
    if (factor == 1) return flow;
    const int cw = flow.width() / factor;
    const int ch = flow.height() / factor;
    const double norm = 1.0 / (static_cast<double>(factor) * factor * factor);
    FlowField out(cw, ch, flow.convention());
    for (int cy = 0; cy < ch; ++cy) {
        for (int cx = 0; cx < cw; ++cx) {
            double su = 0.0;
            double sv = 0.0;
            for (int dy = 0; dy < factor; ++dy) {
                for (int dx = 0; dx < factor; ++dx) {
                    su += flow.u(cx * factor + dx, cy * factor + dy);
                    sv += flow.v(cx * factor + dx, cy * factor + dy);
                }
            }
            out.set(cx, cy, su * norm, sv * norm);
        }
    }
    return out;
}

Mask downsample_mask(const Mask& mask, int factor) {
    if (factor <= 0) throw ValidationError("downsample_mask: factor must be positive");
    if (mask.width() % factor != 0 || mask.height() % factor != 0) {
        throw ValidationError("downsample_mask: " + dims(mask.width(), mask.height()) +
                              " is not divisible by factor " + std::to_string(factor));
    }
    Mask out(mask.width() / factor, mask.height() / factor);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask.at(x, y)) out.set(x / factor, y / factor, true);
        }
    }
    return out;
}

EtaMap derive_eta_map(const FlowField& flow, double discontinuity_threshold) {
    if (!(discontinuity_threshold > 0.0)) {
        throw ValidationError("derive_eta_map: discontinuity threshold must be > 0");
    }
    const int w = flow.width();
    const int h = flow.height();
    EtaMap eta(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double u = flow.u(x, y);
            const double v = flow.v(x, y);
            const double sx = x - u;
            const double sy = y - v;
            bool regenerate = sx < 0.0 || sy < 0.0 || sx > w - 1 || sy > h - 1;
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int k = 0; k < 4 && !regenerate; ++k) {
                if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
                const double du = std::abs(flow.u(nx[k], ny[k]) - u);
                const double dv = std::abs(flow.v(nx[k], ny[k]) - v);
                regenerate = std::max(du, dv) > discontinuity_threshold;
            }
            if (regenerate) eta.set(x, y, 1.0);
        }
    }
    return eta;
}

EtaMap merge_eta_mask(const EtaMap& eta, const Mask& mask) {
    if (eta.width() != mask.width() || eta.height() != mask.height()) {
        throw ValidationError("merge_eta_mask: mask " + dims(mask.width(), mask.height()) +
                              " does not match eta map " + dims(eta.width(), eta.height()));
    }
    EtaMap out = eta;
    for (int y = 0; y < eta.height(); ++y) {
        for (int x = 0; x < eta.width(); ++x) {
            if (mask.at(x, y)) out.set(x, y, 1.0);
        }
    }
    return out;
}

namespace {

// Cosine of the angle between two vectors, or nothing if either is zero.
bool pixel_cosine(double au, double av, double bu, double bv, double& cosine) {
    const double na = std::hypot(au, av);
    const double nb = std::hypot(bu, bv);
    if (na == 0.0 || nb == 0.0) return false;
    cosine = std::clamp(((au / na) * (bu / nb)) + ((av / na) * (bv / nb)), -1.0, 1.0);
    return true;
}

void require_same_dims(const FlowField& a, const FlowField& b, const char* op) {
    if (!a.same_dims(b)) {
        throw ValidationError(std::string(op) + ": flows " + dims(a.width(), a.height()) + " and " +
                              dims(b.width(), b.height()) + " differ in size (resample first)");
    }
}

} // namespace

FlowCorrelation flow_cosine_correlation(const FlowField& a, const FlowField& b) {
    require_same_dims(a, b, "flow_cosine_correlation");
    FlowCorrelation result;
    double sum = 0.0;
    const auto au = a.u_data(), av = a.v_data(), bu = b.u_data(), bv = b.v_data();
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
        double cosine = 0.0;
        if (pixel_cosine(au[i], av[i], bu[i], bv[i], cosine)) {
            sum += cosine;
            ++result.valid_pixels;
        }
    }
    if (result.valid_pixels > 0) {
        result.defined = true;
        result.value = std::clamp(sum / static_cast<double>(result.valid_pixels), -1.0, 1.0);
    }
    return result;
}

TensorGrid flow_cosine_map(const FlowField& a, const FlowField& b) {
    require_same_dims(a, b, "flow_cosine_map");
    TensorGrid map(a.width(), a.height(), 1);
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            double cosine = 0.0;
            if (pixel_cosine(a.u(x, y), a.v(x, y), b.u(x, y), b.v(x, y), cosine)) map.at(x, y) = cosine;
        }
    }
    return map;
}

TensorGrid clone_patch(const TensorGrid& grid, PixelBox source, std::span<const PixelPos> targets) {
    if (source.width <= 0 || source.height <= 0) {
        throw ValidationError("clone_patch: source box is empty");
    }
    if (source.x < 0 || source.y < 0 || source.x + source.width > grid.width() ||
        source.y + source.height > grid.height()) {
        throw ValidationError("clone_patch: source box exceeds the grid");
    }
    TensorGrid out = grid;
    for (const PixelPos& target : targets) {
        const int left = target.x - source.width / 2;
        const int top = target.y - source.height / 2;
        for (int dy = 0; dy < source.height; ++dy) {
            const int y = top + dy;
            if (y < 0 || y >= grid.height()) continue;
            for (int dx = 0; dx < source.width; ++dx) {
                const int x = left + dx;
                if (x < 0 || x >= grid.width()) continue;
                for (int c = 0; c < grid.channels(); ++c) {
                    out.at(x, y, c) = grid.at(source.x + dx, source.y + dy, c);
                }
            }
        }
    }
    return out;
}

} // namespace flowgen
