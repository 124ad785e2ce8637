#include "flowgen/metrics/flow_estimator.hpp"

#include "flowgen/error.hpp"
#include "flowgen/flow/flow_ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace flowgen {

namespace {

constexpr double kSorOmega = 1.9;
constexpr int kMinLevelSize = 8;

struct Plane {
    int w = 0;
    int h = 0;
    std::vector<double> px;

    Plane() = default;
    Plane(int w_, int h_) : w(w_), h(h_), px(static_cast<std::size_t>(w_) * h_, 0.0) {}
    double& at(int x, int y) { return px[static_cast<std::size_t>(y) * w + x]; }
    double at(int x, int y) const { return px[static_cast<std::size_t>(y) * w + x]; }
    double clamped(int x, int y) const { return at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); }
};

Plane from_grid(const TensorGrid& g) {
    Plane p(g.width(), g.height());
    std::copy(g.data().begin(), g.data().end(), p.px.begin());
    return p;
}

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    return k;
}

Plane blur(const Plane& in, double sigma) {
    if (sigma <= 0.0) return in;
    const auto k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    Plane tmp(in.w, in.h), out(in.w, in.h);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * in.clamped(x + i, y);
            tmp.at(x, y) = acc;
        }
    }
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.clamped(x, y + i);
            out.at(x, y) = acc;
        }
    }
    return out;
}

// Anti-aliased 2:1 reduction; coarse pixel (x, y) sits at fine (2x + 0.5, 2y + 0.5).
Plane reduce(const Plane& in) {
    const Plane smooth = blur(in, 1.0);
    Plane out(in.w / 2, in.h / 2);
    for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
            out.at(x, y) = 0.25 * (smooth.clamped(2 * x, 2 * y) + smooth.clamped(2 * x + 1, 2 * y) +
                                   smooth.clamped(2 * x, 2 * y + 1) + smooth.clamped(2 * x + 1, 2 * y + 1));
        }
    }
    return out;
}

double bilinear(const Plane& p, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(p.w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(p.h - 1));
    const int x0 = std::min(static_cast<int>(x), p.w - 2 < 0 ? 0 : p.w - 2);
    const int y0 = std::min(static_cast<int>(y), p.h - 2 < 0 ? 0 : p.h - 2);
    const int x1 = std::min(x0 + 1, p.w - 1);
    const int y1 = std::min(y0 + 1, p.h - 1);
    const double ax = x - x0;
    const double ay = y - y0;
    return (1 - ax) * (1 - ay) * p.at(x0, y0) + ax * (1 - ay) * p.at(x1, y0) + (1 - ax) * ay * p.at(x0, y1) +
           ax * ay * p.at(x1, y1);
}

// Coarse displacement field to the next finer level (doubling magnitudes).
Plane expand(const Plane& coarse, int w, int h) {
    Plane out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            out.at(x, y) = 2.0 * bilinear(coarse, (x - 0.5) / 2.0, (y - 0.5) / 2.0);
        }
    }
    return out;
}

void gradient(const Plane& p, Plane& gx, Plane& gy) {
    gx = Plane(p.w, p.h);
    gy = Plane(p.w, p.h);
    for (int y = 0; y < p.h; ++y) {
        for (int x = 0; x < p.w; ++x) {
            gx.at(x, y) = 0.5 * (p.clamped(x + 1, y) - p.clamped(x - 1, y));
            gy.at(x, y) = 0.5 * (p.clamped(x, y + 1) - p.clamped(x, y - 1));
        }
    }
}

// Solves for d with I2(x + d) ~ I1(x) at one level, starting from (u, v).
void solve_level(const Plane& i1, const Plane& i2, Plane& u, Plane& v, const FlowEstimatorParams& prm) {
    const int w = i1.w;
    const int h = i1.h;
    Plane i2x, i2y;
    gradient(i2, i2x, i2y);
    // lambda is relative to the mean squared gradient, so contrast changes do not
    // shift the balance between the two terms.
    double grad_energy = 0.0;
    for (std::size_t i = 0; i < i2x.px.size(); ++i) grad_energy += i2x.px[i] * i2x.px[i] + i2y.px[i] * i2y.px[i];
    grad_energy /= static_cast<double>(i2x.px.size());
    const double alpha = prm.smoothness * std::max(grad_energy, 1e-12);
    const int warps = std::max(1, prm.warps);
    const int sweeps = std::max(1, prm.iterations / warps);

    Plane au(w, h), av(w, h), du(w, h), dv(w, h), d(w, h);
    for (int n = 0; n < warps; ++n) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double sx = x + u.at(x, y);
                const double sy = y + v.at(x, y);
                const double iw = bilinear(i2, sx, sy);
                const double ix = bilinear(i2x, sx, sy);
                const double iy = bilinear(i2y, sx, sy);
                const double dif = i1.at(x, y) - iw + ix * u.at(x, y) + iy * v.at(x, y);
                au.at(x, y) = dif * ix;
                av.at(x, y) = dif * iy;
                du.at(x, y) = ix * ix;
                dv.at(x, y) = iy * iy;
                d.at(x, y) = ix * iy;
            }
        }
        for (int it = 0; it < sweeps; ++it) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    // Neumann boundary: only in-image neighbours enter the Laplacian.
                    double su = 0.0, sv = 0.0;
                    int nb = 0;
                    const int xs[4] = {x - 1, x + 1, x, x};
                    const int ys[4] = {y, y, y - 1, y + 1};
                    for (int k = 0; k < 4; ++k) {
                        if (xs[k] < 0 || xs[k] >= w || ys[k] < 0 || ys[k] >= h) continue;
                        su += u.at(xs[k], ys[k]);
                        sv += v.at(xs[k], ys[k]);
                        ++nb;
                    }
                    const double uk = u.at(x, y);
                    const double vk = v.at(x, y);
                    const double un = (au.at(x, y) - d.at(x, y) * vk + alpha * su) / (du.at(x, y) + alpha * nb);
                    u.at(x, y) = (1.0 - kSorOmega) * uk + kSorOmega * un;
                    const double vn =
                        (av.at(x, y) - d.at(x, y) * u.at(x, y) + alpha * sv) / (dv.at(x, y) + alpha * nb);
                    v.at(x, y) = (1.0 - kSorOmega) * vk + kSorOmega * vn;
                }
            }
        }
    }
}

} // namespace

TensorGrid to_gray(const TensorGrid& image) {
    const int c = image.channels();
    if (c != 1 && c != 3 && c != 4) throw ValidationError("to_gray: expected 1, 3 or 4 channels");
    TensorGrid out(image.width(), image.height(), 1);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            double g = c == 1 ? image.at(x, y, 0)
                              : 0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) + 0.114 * image.at(x, y, 2);
            out.at(x, y) = std::clamp(g, 0.0, 1.0);
        }
    }
    return out;
}

HornSchunckEstimator::HornSchunckEstimator(FlowEstimatorParams params) : params_(params) {
    if (params.levels < 1 || params.iterations < 1 || params.warps < 1) {
        throw ValidationError("flow estimator: levels, iterations and warps must be positive");
    }
    if (!(params.smoothness > 0.0)) throw ValidationError("flow estimator: smoothness must be positive");
}

FlowEstimate HornSchunckEstimator::estimate(const TensorGrid& a, const TensorGrid& b) const {
    if (a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels()) {
        throw ValidationError("estimate_flow: images differ in shape");
    }
    if (a.width() < 16 || a.height() < 16) throw ValidationError("estimate_flow: images must be at least 16x16");

    const int w = a.width();
    const int h = a.height();
    const Plane g1 = from_grid(to_gray(a));
    const Plane g2 = from_grid(to_gray(b));

    const auto [lo1, hi1] = std::minmax_element(g1.px.begin(), g1.px.end());
    const auto [lo2, hi2] = std::minmax_element(g2.px.begin(), g2.px.end());
    if (*hi1 - *lo1 < 1e-9 && *hi2 - *lo2 < 1e-9) {
        return {FlowField(w, h, FlowConvention::backward), true};
    }

    std::vector<Plane> p1{blur(g1, params_.presmooth_sigma)};
    std::vector<Plane> p2{blur(g2, params_.presmooth_sigma)};
    while (static_cast<int>(p1.size()) < params_.levels && p1.back().w / 2 >= kMinLevelSize &&
           p1.back().h / 2 >= kMinLevelSize) {
        p1.push_back(reduce(p1.back()));
        p2.push_back(reduce(p2.back()));
    }

    Plane u(p1.back().w, p1.back().h), v(p1.back().w, p1.back().h);
    for (std::size_t level = p1.size(); level-- > 0;) {
        if (u.w != p1[level].w || u.h != p1[level].h) {
            u = expand(u, p1[level].w, p1[level].h);
            v = expand(v, p1[level].w, p1[level].h);
        }
        solve_level(p1[level], p2[level], u, v, params_);
    }

    std::vector<double> fu(u.px.size()), fv(v.px.size());
    for (std::size_t i = 0; i < fu.size(); ++i) {
        fu[i] = -u.px[i];
        fv[i] = -v.px[i];
    }
    return {FlowField(w, h, FlowConvention::backward, std::move(fu), std::move(fv)), false};
}

FlowEstimate estimate_flow(const TensorGrid& a, const TensorGrid& b, const FlowEstimatorParams& params) {
    return HornSchunckEstimator(params).estimate(a, b);
}

} // namespace flowgen
