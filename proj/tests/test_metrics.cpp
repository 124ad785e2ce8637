#include "support.hpp"

#include "flowgen/error.hpp"
#include "flowgen/flow/flow_ops.hpp"
#include "flowgen/metrics/flow_estimator.hpp"
#include "flowgen/metrics/metrics.hpp"
#include "flowgen/metrics/ssim.hpp"

#include <doctest.h>

using namespace flowgen;
using testsupport::smooth_texture;

namespace {

// One window at a time, straight from the definition.
double ssim_oracle(const TensorGrid& a, const TensorGrid& b) {
    const int r = 5;
    double w[11][11], total = 0;
    for (int i = -r; i <= r; ++i) {
        for (int j = -r; j <= r; ++j) total += w[i + r][j + r] = std::exp(-(i * i + j * j) / (2 * 1.5 * 1.5));
    }
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double sum = 0;
    int windows = 0;
    for (int c = 0; c < a.channels(); ++c) {
        for (int y = r; y < a.height() - r; ++y) {
            for (int x = r; x < a.width() - r; ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int i = -r; i <= r; ++i) {
                    for (int j = -r; j <= r; ++j) {
                        const double k = w[i + r][j + r] / total;
                        const double va = std::clamp(a.at(x + j, y + i, c), 0.0, 1.0);
                        const double vb = std::clamp(b.at(x + j, y + i, c), 0.0, 1.0);
                        ma += k * va;
                        mb += k * vb;
                        saa += k * va * va;
                        sbb += k * vb * vb;
                        sab += k * va * vb;
                    }
                }
                const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
                sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++windows;
            }
        }
    }
    return sum / windows;
}

double mean_epe(const FlowField& f, double u, double v, int margin) {
    double sum = 0;
    int n = 0;
    for (int y = margin; y < f.height() - margin; ++y) {
        for (int x = margin; x < f.width() - margin; ++x) {
            sum += std::hypot(f.u(x, y) - u, f.v(x, y) - v);
            ++n;
        }
    }
    return sum / n;
}

TensorGrid checkerboard(int n, int cell) {
    TensorGrid t(n, n, 1);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) t.at(x, y) = ((x / cell + y / cell) % 2) ? 0.9 : 0.1;
    }
    return t;
}

} // namespace

TEST_CASE("to_gray uses Rec. 601 luma and clamps") {
    const TensorGrid rgb(1, 1, 3, std::vector<double>{1.0, 0.5, 0.25});
    CHECK(to_gray(rgb).at(0, 0) == doctest::Approx(0.299 + 0.587 * 0.5 + 0.114 * 0.25).epsilon(1e-12));
    CHECK(to_gray(TensorGrid(1, 1, 1, 1.7)).at(0, 0) == 1.0);
    CHECK_THROWS_AS(to_gray(TensorGrid(2, 2, 2)), ValidationError);
}

TEST_CASE("estimate_flow: identical frames give zero flow") {
    for (unsigned seed : {1u, 2u}) {
        const TensorGrid a = smooth_texture(48, 40, 3, seed);
        const FlowEstimate e = estimate_flow(a, a);
        double worst = 0;
        for (std::size_t i = 0; i < e.flow.pixel_count(); ++i) {
            worst = std::max(worst, std::hypot(e.flow.u_data()[i], e.flow.v_data()[i]));
        }
        CHECK(worst <= 1e-3);
        CHECK(e.flow.convention() == FlowConvention::backward);
    }
    std::mt19937_64 g(3);
    const TensorGrid noise = testsupport::random_grid(g, 32, 32, 1);
    const FlowEstimate e = estimate_flow(noise, noise);
    for (double v : e.flow.u_data()) CHECK(std::abs(v) <= 1e-3);
}

TEST_CASE("estimate_flow: one-pixel translation and sign symmetry") {
    const TensorGrid a = smooth_texture(128, 128, 1, 4);
    // Content moves right by one pixel; the estimate maps b back to a.
    const TensorGrid b = smooth_texture(128, 128, 1, 4, 1, 0);
    const FlowEstimate e = estimate_flow(a, b);
    CHECK_FALSE(e.low_confidence);
    CHECK(mean_epe(e.flow, -1, 0, 8) < 0.2);
    const TensorGrid back = warp_backward(b, e.flow);
    double err = 0;
    for (int y = 8; y < 120; ++y) {
        for (int x = 8; x < 120; ++x) err = std::max(err, std::abs(back.at(x, y) - a.at(x, y)));
    }
    CHECK(err < 0.02);

    const TensorGrid plus = smooth_texture(96, 96, 1, 5, 2, 0), minus = smooth_texture(96, 96, 1, 5, -2, 0);
    const TensorGrid base = smooth_texture(96, 96, 1, 5);
    auto mean_u = [](const FlowField& f) {
        double s = 0;
        for (double v : f.u_data()) s += v;
        return s / static_cast<double>(f.pixel_count());
    };
    const double up = mean_u(estimate_flow(base, plus).flow), um = mean_u(estimate_flow(base, minus).flow);
    CHECK(up < -1.0);
    CHECK(um > 1.0);
}

TEST_CASE("estimate_flow: degenerate and invalid input") {
    const FlowEstimate e = estimate_flow(TensorGrid(32, 32, 1, 0.4), TensorGrid(32, 32, 1, 0.4));
    CHECK(e.low_confidence);
    for (double v : e.flow.u_data()) CHECK(v == 0.0);
    CHECK_THROWS_AS(estimate_flow(TensorGrid(15, 32, 1), TensorGrid(15, 32, 1)), ValidationError);
    CHECK_THROWS_AS(estimate_flow(TensorGrid(32, 32, 1), TensorGrid(32, 33, 1)), ValidationError);
    FlowEstimatorParams bad;
    bad.smoothness = 0;
    CHECK_THROWS_AS(HornSchunckEstimator(bad).estimate(TensorGrid(32, 32, 1), TensorGrid(32, 32, 1)),
                    ValidationError);
}

TEST_CASE("ssim") {
    std::mt19937_64 g(6);
    const TensorGrid a = testsupport::random_grid(g, 23, 19, 3);
    const TensorGrid b = testsupport::random_grid(g, 23, 19, 3);
    CHECK(ssim(a, a) == 1.0);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
    CHECK(ssim(a, b) == doctest::Approx(ssim_oracle(a, b)).epsilon(1e-10));
    CHECK(ssim(a, b) < 1.0);

    const TensorGrid board = checkerboard(32, 4);
    TensorGrid inverted = board;
    for (double& v : inverted.data()) v = 1 - v;
    CHECK(ssim(board, inverted) < 0.0);

    const TensorGrid tex = smooth_texture(48, 48, 1, 7);
    TensorGrid noisy = tex;
    std::normal_distribution<double> n(0, 0.01);
    for (double& v : noisy.data()) v += n(g);
    CHECK(ssim(tex, noisy) > 0.9);

    CHECK_THROWS_AS(ssim(TensorGrid(10, 20, 1), TensorGrid(10, 20, 1)), ValidationError);
    CHECK_THROWS_AS(ssim(a, TensorGrid(23, 19, 1)), ValidationError);
}

TEST_CASE("motion consistency") {
    std::vector<TensorGrid> video, brighter;
    for (int f = 0; f < 8; ++f) {
        video.push_back(smooth_texture(64, 64, 3, 8, f, 0));
        TensorGrid t = video.back();
        for (double& v : t.data()) v += 0.1;
        brighter.push_back(t);
    }
    const double mc = motion_consistency(video);
    CHECK(mc >= 0.95);
    CHECK(std::abs(motion_consistency(brighter) - mc) < 0.05);

    const std::vector<TensorGrid> still(3, video[0]);
    CHECK(motion_consistency(still) == 1.0);

    std::mt19937_64 g(9);
    std::vector<TensorGrid> noise;
    for (int f = 0; f < 6; ++f) noise.push_back(testsupport::random_grid(g, 64, 64, 3));
    const MotionConsistencyReport r = motion_consistency_report(noise, HornSchunckEstimator());
    CHECK(r.per_pair.size() == 5);
    CHECK(r.mean < 0.3);

    CHECK_THROWS_AS(motion_consistency({video[0]}), ValidationError);
}

TEST_CASE("correlation experiment") {
    std::vector<GridPair> images, latents, same;
    for (unsigned seed = 0; seed < 3; ++seed) {
        const double dx = seed == 1 ? -8 : 8, dy = seed == 2 ? 8 : 0;
        GridPair img{smooth_texture(128, 128, 1, 20 + seed), smooth_texture(128, 128, 1, 20 + seed, dx, dy)};
        // The identity codec at 1/8 resolution: block averages of the frames.
        auto shrink = [](const TensorGrid& t) {
            TensorGrid out(16, 16, 1);
            for (int y = 0; y < 128; ++y) {
                for (int x = 0; x < 128; ++x) out.at(x / 8, y / 8) += t.at(x, y) / 64;
            }
            return out;
        };
        latents.push_back({shrink(img.first), shrink(img.second)});
        same.push_back({smooth_texture(32, 32, 1, 30 + seed), smooth_texture(32, 32, 1, 30 + seed, 1, 0)});
        images.push_back(std::move(img));
    }
    const HornSchunckEstimator est;
    const CorrelationReport r = correlation_experiment(images, latents, est);
    REQUIRE(r.per_pair.size() == 3);
    CHECK(r.mean >= 0.9);
    for (double v : r.per_pair) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    CHECK(r.heat_maps.size() == 3);
    CHECK(r.heat_maps[0].width() == 16);

    const CorrelationReport self = correlation_experiment(same, same, est);
    CHECK(self.mean == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(correlation_experiment(images, {}, est), ValidationError);
}
