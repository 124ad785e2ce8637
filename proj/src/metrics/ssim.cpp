#include "flowgen/metrics/ssim.hpp"

#include "flowgen/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace flowgen {

namespace {

std::vector<double> window_1d(const SsimParams& p) {
    std::vector<double> k(static_cast<std::size_t>(p.window));
    const double c = (p.window - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < p.window; ++i) {
        k[i] = std::exp(-0.5 * (i - c) * (i - c) / (p.sigma * p.sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable 'valid' filtering of a plane given as a callable.
template <class F>
std::vector<double> filter_valid(F value, int w, int h, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int ow = w - n + 1;
    const int oh = h - n + 1;
    std::vector<double> rows(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += k[i] * value(x + i, y);
            rows[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    return out;
}

void check(const TensorGrid& a, const TensorGrid& b, const SsimParams& p) {
    if (!a.same_shape(b)) throw ValidationError("ssim: images differ in shape");
    if (p.window < 1 || !(p.sigma > 0.0)) throw ValidationError("ssim: bad window parameters");
    if (a.width() < p.window || a.height() < p.window) {
        throw ValidationError("ssim: image smaller than the " + std::to_string(p.window) + "x" +
                              std::to_string(p.window) + " window");
    }
}

} // namespace

TensorGrid ssim_map(const TensorGrid& a, const TensorGrid& b, int channel, const SsimParams& p) {
    check(a, b, p);
    const auto k = window_1d(p);
    const int w = a.width();
    const int h = a.height();
    auto ca = [&](int x, int y) { return std::clamp(a.at(x, y, channel), 0.0, 1.0); };
    auto cb = [&](int x, int y) { return std::clamp(b.at(x, y, channel), 0.0, 1.0); };

    const auto mu_a = filter_valid(ca, w, h, k);
    const auto mu_b = filter_valid(cb, w, h, k);
    const auto aa = filter_valid([&](int x, int y) { return ca(x, y) * ca(x, y); }, w, h, k);
    const auto bb = filter_valid([&](int x, int y) { return cb(x, y) * cb(x, y); }, w, h, k);
    const auto ab = filter_valid([&](int x, int y) { return ca(x, y) * cb(x, y); }, w, h, k);

    const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
    const int ow = w - p.window + 1;
    const int oh = h - p.window + 1;
    TensorGrid out(ow, oh, 1);
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        const double ma = mu_a[i];
        const double mb = mu_b[i];
        const double va = aa[i] - ma * ma;
        const double vb = bb[i] - mb * mb;
        const double cov = ab[i] - ma * mb;
        dst[i] = ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return out;
}

double ssim(const TensorGrid& a, const TensorGrid& b, const SsimParams& p) {
    check(a, b, p);
    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        const TensorGrid m = ssim_map(a, b, c, p);
        double sum = 0.0;
        for (double v : m.data()) sum += v;
        total += sum / static_cast<double>(m.size());
    }
    return total / a.channels();
}

} // namespace flowgen
