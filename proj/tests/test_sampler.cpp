#include "support.hpp"

#include "flowgen/error.hpp"
#include "flowgen/flow/flow_ops.hpp"
#include "flowgen/sampler/attention.hpp"
#include "flowgen/sampler/ddim.hpp"
#include "flowgen/sampler/denoiser.hpp"
#include "flowgen/sampler/pipeline.hpp"

#include <doctest.h>

#include <map>

using namespace flowgen;
using testsupport::max_abs_diff;
using testsupport::normal_grid;
using testsupport::relative_l2;

namespace {

const NoiseSchedule& default_schedule() {
    static const NoiseSchedule s = make_schedule({});
    return s;
}

NoiseSchedule schedule_with(int steps, int tau = 400) {
    ScheduleConfig c;
    c.inference_steps = steps;
    c.tau = tau;
    return make_schedule(c);
}

TensorGrid scaled(const TensorGrid& g, double k) {
    TensorGrid out = g;
    for (double& v : out.data()) v *= k;
    return out;
}

// Records every call so tests can see what the frame loop asks of a denoiser.
class SpyDenoiser final : public Denoiser {
public:
    struct Call {
        int t;
        PromptBranch branch;
        std::vector<TensorGrid> attend;
        bool attend_self_first;
    };
    explicit SpyDenoiser(const Denoiser& inner) : inner_(inner) {}
    TensorGrid predict(const TensorGrid& z, int t, const Conditioning& c, PromptBranch branch,
                       const AttendList& attend) const override {
        Call call{t, branch, {}, !attend.empty() && attend.front() != nullptr && *attend.front() == z};
        for (const TensorGrid* g : attend) call.attend.push_back(*g);
        calls.push_back(std::move(call));
        return inner_.predict(z, t, c, branch, attend);
    }
    mutable std::vector<Call> calls;

private:
    const Denoiser& inner_;
};

std::vector<double> naive_attention(const Tokens& q, const Tokens& k, const Tokens& v) {
    std::vector<double> out(static_cast<std::size_t>(q.count) * v.dim, 0.0);
    for (int i = 0; i < q.count; ++i) {
        std::vector<double> w(k.count);
        double z = 0;
        for (int j = 0; j < k.count; ++j) {
            double dot = 0;
            for (int d = 0; d < q.dim; ++d) dot += q.at(i, d) * k.at(j, d);
            w[j] = std::exp(dot / std::sqrt(static_cast<double>(q.dim)));
            z += w[j];
        }
        for (int j = 0; j < k.count; ++j) {
            for (int d = 0; d < v.dim; ++d) out[static_cast<std::size_t>(i) * v.dim + d] += w[j] / z * v.at(j, d);
        }
    }
    return out;
}

Tokens random_tokens(std::mt19937_64& g, int count, int dim) {
    std::normal_distribution<double> n(0, 1);
    Tokens t(count, dim);
    for (double& v : t.data) v = n(g);
    return t;
}

} // namespace

TEST_CASE("schedule: defaults") {
    const NoiseSchedule& s = default_schedule();
    CHECK(s.train_steps() == 1000);
    CHECK(s.step_indices().size() == 200);
    CHECK(s.tau() == 400);
    CHECK(s.step_position(s.tau()) >= 0);
    for (std::size_t i = 1; i < s.step_indices().size(); ++i) CHECK(s.step_indices()[i] > s.step_indices()[i - 1]);
    for (int t = 1; t < 1000; ++t) REQUIRE(s.alpha_bar(t) < s.alpha_bar(t - 1));
    CHECK(s.alpha_bar(999) < s.alpha_bar(0));
    CHECK(s.alpha_bar(0) > 0.99 * (1 - s.beta(0)));

    const std::vector<int> up = s.steps_to_tau();
    CHECK(up.front() == 0);
    CHECK(up.back() == 400);
    CHECK(up.size() == 81);
}

TEST_CASE("schedule: alpha_bar matches a direct product of sqrt-spaced betas") {
    const NoiseSchedule& s = default_schedule();
    const double a = std::sqrt(8.5e-4), b = std::sqrt(1.2e-2);
    double prod = 1.0;
    for (int t = 0; t < 1000; ++t) {
        const double root = a + (b - a) * t / 999.0;
        prod *= 1.0 - root * root;
        REQUIRE(s.alpha_bar(t) == doctest::Approx(prod).epsilon(1e-12));
    }
}

TEST_CASE("schedule: tau snaps down and invalid ranges are rejected") {
    CHECK(schedule_with(200, 403).tau() == 400);
    CHECK(schedule_with(50, 419).tau() == 400);
    CHECK(schedule_with(50, 420).tau() == 420);
    ScheduleConfig c;
    c.beta_start = 0;
    c.beta_end = 0;
    CHECK_THROWS_AS(make_schedule(c), ValidationError);
    c = {};
    c.beta_start = 0.02;
    CHECK_THROWS_AS(make_schedule(c), ValidationError);
    c = {};
    c.inference_steps = 1001;
    CHECK_THROWS_AS(make_schedule(c), ValidationError);
    c = {};
    c.tau = 1000;
    CHECK_THROWS_AS(make_schedule(c), ValidationError);
}

TEST_CASE("ddim_step: eta = 0 and eps = 0 only rescales") {
    const NoiseSchedule& s = default_schedule();
    std::mt19937_64 g(31);
    const TensorGrid z = normal_grid(g, 6, 5, 4);
    const TensorGrid zero(6, 5, 4);
    const CounterRng rng(1);
    for (auto [from, to] : {std::pair{400, 395}, std::pair{995, 0}, std::pair{5, 0}}) {
        const double k = std::sqrt(s.alpha_bar(to) / s.alpha_bar(from));
        CHECK(max_abs_diff(ddim_step(z, zero, from, to, 0.0, rng, s).latent, scaled(z, k)) <= 1e-12);
        CHECK(max_abs_diff(ddim_inversion_step(z, zero, to, from, s), scaled(z, 1 / k)) <= 1e-12);
    }
}

TEST_CASE("ddim_step: eta = 0 is the deterministic update term for term") {
    const NoiseSchedule& s = default_schedule();
    std::mt19937_64 g(32);
    const TensorGrid z = normal_grid(g, 5, 5, 2);
    const TensorGrid eps = normal_grid(g, 5, 5, 2);
    const int from = 600, to = 595;
    const double af = s.alpha_bar(from), at = s.alpha_bar(to);
    const TensorGrid out = ddim_step(z, eps, from, to, 0.0, CounterRng(9), s).latent;
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double x0 = (z.data()[k] - std::sqrt(1 - af) * eps.data()[k]) / std::sqrt(af);
        CHECK(out.data()[k] == doctest::Approx(std::sqrt(at) * x0 + std::sqrt(1 - at) * eps.data()[k]).epsilon(1e-14));
    }
}

TEST_CASE("ddim_sigma: eta = 1 equals the ancestral posterior scale") {
    ScheduleConfig c;
    c.inference_steps = 1000;
    const NoiseSchedule s = make_schedule(c);
    for (int t : {1, 10, 250, 500, 999}) {
        const double posterior = (1 - s.alpha_bar(t - 1)) / (1 - s.alpha_bar(t)) * s.beta(t);
        CHECK(ddim_sigma(s.alpha_bar(t), s.alpha_bar(t - 1), 1.0) ==
              doctest::Approx(std::sqrt(posterior)).epsilon(1e-12));
        CHECK(ddim_sigma(s.alpha_bar(t), s.alpha_bar(t - 1), 0.0) == 0.0);
    }
}

TEST_CASE("ddim inversion and generation with a frozen eps are inverse steps") {
    const NoiseSchedule& s = default_schedule();
    std::mt19937_64 g(33);
    for (auto [lo, hi] : {std::pair{0, 5}, std::pair{395, 400}, std::pair{100, 900}}) {
        const TensorGrid z = normal_grid(g, 8, 8, 4);
        const TensorGrid eps = normal_grid(g, 8, 8, 4);
        const TensorGrid up = ddim_inversion_step(z, eps, lo, hi, s);
        const TensorGrid back = ddim_step(up, eps, hi, lo, 0.0, CounterRng(0), s).latent;
        CHECK(max_abs_diff(back, z) <= 1e-9);
    }
}

TEST_CASE("ddim_step: a uniform map and a scalar eta are bit-identical") {
    const NoiseSchedule& s = default_schedule();
    std::mt19937_64 g(34);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const double eta = trial == 0 ? 0.0 : (trial == 1 ? 1.0 : u(g));
        const CounterRng rng(g());
        TensorGrid a = normal_grid(g, 7, 6, 4), b = a;
        for (std::size_t i = s.step_indices().size() - 1; i > 0; i -= 17) {
            const int from = s.step_indices()[i], to = s.step_indices()[i - 1];
            const TensorGrid eps = normal_grid(g, 7, 6, 4);
            a = ddim_step(a, eps, from, to, eta, rng.substream(from), s).latent;
            b = ddim_step(b, eps, from, to, EtaMap::uniform(7, 6, eta), rng.substream(from), s).latent;
            if (i < 17) break;
        }
        CHECK(a == b);
    }
}

TEST_CASE("ddim_step: pixels with eta = 0 ignore the noise stream") {
    const NoiseSchedule& s = default_schedule();
    std::mt19937_64 g(35);
    const TensorGrid z = normal_grid(g, 8, 4, 3);
    const TensorGrid eps = normal_grid(g, 8, 4, 3);
    EtaMap eta(8, 4);
    for (int y = 0; y < 4; ++y) {
        for (int x = 4; x < 8; ++x) eta.set(x, y, 1.0);
    }
    const TensorGrid det = ddim_step(z, eps, 400, 395, 0.0, CounterRng(1), s).latent;
    const TensorGrid a = ddim_step(z, eps, 400, 395, eta, CounterRng(1), s).latent;
    const TensorGrid b = ddim_step(z, eps, 400, 395, eta, CounterRng(2), s).latent;
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 8; ++x) {
            for (int c = 0; c < 3; ++c) {
                if (x < 4) {
                    CHECK(a.at(x, y, c) == det.at(x, y, c));
                    CHECK(b.at(x, y, c) == det.at(x, y, c));
                } else {
                    CHECK(a.at(x, y, c) != b.at(x, y, c));
                }
            }
        }
    }
    CHECK_FALSE(ddim_step(z, eps, 400, 395, eta, CounterRng(1), s).clamped);
}

TEST_CASE("ddim_step: validation") {
    const NoiseSchedule& s = default_schedule();
    const TensorGrid z(4, 4, 1), eps(4, 4, 1);
    CHECK_THROWS_AS(ddim_step(z, eps, 395, 400, 0.0, CounterRng(0), s), ValidationError);
    CHECK_THROWS_AS(ddim_step(z, eps, 401, 395, 0.0, CounterRng(0), s), ValidationError);
    CHECK_THROWS_AS(ddim_step(z, TensorGrid(4, 4, 2), 400, 395, 0.0, CounterRng(0), s), ValidationError);
    CHECK_THROWS_AS(ddim_step(z, eps, 400, 395, EtaMap(3, 4), CounterRng(0), s), ValidationError);
    CHECK_THROWS_AS(ddim_inversion_step(z, eps, 400, 395, s), ValidationError);
}

TEST_CASE("cfg_combine") {
    std::mt19937_64 g(36);
    const TensorGrid c = normal_grid(g, 9, 9, 4);
    const TensorGrid u = normal_grid(g, 9, 9, 4);
    CHECK(cfg_combine(c, u, 1.0) == c);
    for (double gamma : {0.0, 2.5, 7.5}) CHECK(cfg_combine(c, c, gamma) == c);
    const TensorGrid two(1, 1, 1, 2.0), zero(1, 1, 1, 0.0);
    CHECK(cfg_combine(two, zero, 7.5).at(0, 0) == 15.0);

    // Affine in gamma.
    const TensorGrid mid = cfg_combine(c, u, 4.0);
    const TensorGrid lo = cfg_combine(c, u, 0.5), hi = cfg_combine(c, u, 7.5);
    for (std::size_t k = 0; k < c.size(); ++k) {
        CHECK(mid.data()[k] == doctest::Approx(0.5 * (lo.data()[k] + hi.data()[k])).epsilon(1e-12));
    }
    CHECK_THROWS_AS(cfg_combine(c, TensorGrid(9, 9, 3), 2.0), ValidationError);
}

TEST_CASE("noise_latent uses the closed-form forward marginal") {
    const NoiseSchedule& s = default_schedule();
    std::mt19937_64 g(37);
    const TensorGrid z0 = normal_grid(g, 4, 4, 2);
    const CounterRng rng(5);
    const TensorGrid zt = noise_latent(z0, 400, rng, s);
    for (std::size_t k = 0; k < z0.size(); ++k) {
        CHECK(zt.data()[k] == doctest::Approx(std::sqrt(s.alpha_bar(400)) * z0.data()[k] +
                                              std::sqrt(1 - s.alpha_bar(400)) * rng.normal(k))
                                  .epsilon(1e-14));
    }
    CHECK(noise_latent(z0, 400, rng, s) == zt);
}

TEST_CASE("mcfa_attention") {
    std::mt19937_64 g(38);
    const Tokens q = random_tokens(g, 6, 4), k = random_tokens(g, 6, 4), v = random_tokens(g, 6, 3);

    SUBCASE("self only is plain self-attention") {
        const Tokens out = mcfa_attention({q, {k}, {v}});
        const auto expected = naive_attention(q, k, v);
        for (std::size_t i = 0; i < expected.size(); ++i) CHECK(out.data[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }
    SUBCASE("duplicated attended latents reduce to self-attention") {
        const Tokens once = mcfa_attention({q, {k}, {v}});
        const Tokens thrice = mcfa_attention({q, {k, k, k}, {v, v, v}});
        for (std::size_t i = 0; i < once.data.size(); ++i) CHECK(thrice.data[i] == doctest::Approx(once.data[i]).epsilon(1e-12));
    }
    SUBCASE("keys are concatenated across attended latents") {
        const Tokens k2 = random_tokens(g, 5, 4), v2 = random_tokens(g, 5, 3);
        Tokens kc(11, 4), vc(11, 3);
        std::copy(k.data.begin(), k.data.end(), kc.data.begin());
        std::copy(k2.data.begin(), k2.data.end(), kc.data.begin() + 24);
        std::copy(v.data.begin(), v.data.end(), vc.data.begin());
        std::copy(v2.data.begin(), v2.data.end(), vc.data.begin() + 18);
        const Tokens out = mcfa_attention({q, {k, k2}, {v, v2}});
        const auto expected = naive_attention(q, kc, vc);
        for (std::size_t i = 0; i < expected.size(); ++i) CHECK(out.data[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }
    SUBCASE("rows of the weights sum to one, even for huge logits") {
        const Tokens big(2, 1, std::vector<double>{1000, -1000});
        const Tokens w = attention_weights({big, {Tokens(3, 1, std::vector<double>{1, 2, 3})},
                                            {Tokens(3, 1, std::vector<double>{0, 0, 0})}});
        for (int r = 0; r < w.count; ++r) {
            double sum = 0;
            for (int c = 0; c < w.dim; ++c) {
                CHECK(std::isfinite(w.at(r, c)));
                sum += w.at(r, c);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
    SUBCASE("hand-computed two-token case") {
        const Tokens one(1, 1, std::vector<double>{1});
        const Tokens out = mcfa_attention({one, {Tokens(1, 1, std::vector<double>{0}), Tokens(1, 1, std::vector<double>{1})},
                                           {Tokens(1, 1, std::vector<double>{0}), Tokens(1, 1, std::vector<double>{1})}});
        CHECK(out.at(0, 0) == doctest::Approx(std::exp(1.0) / (1 + std::exp(1.0))).epsilon(1e-14));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(mcfa_attention({q, {}, {}}), ValidationError);
        CHECK_THROWS_AS(mcfa_attention({q, {random_tokens(g, 6, 3)}, {v}}), ValidationError);
        CHECK_THROWS_AS(mcfa_attention({q, {k, k}, {v, random_tokens(g, 6, 2)}}), ValidationError);
    }
    SUBCASE("grid tokens round trip") {
        const TensorGrid grid = normal_grid(g, 5, 3, 4);
        const Tokens t = grid_tokens(grid);
        CHECK(t.count == 15);
        CHECK(t.dim == 4);
        CHECK(tokens_to_grid(t, 5, 3) == grid);
        CHECK_THROWS_AS(tokens_to_grid(t, 4, 3), ValidationError);
    }
}

TEST_CASE("analytic Gaussian denoiser") {
    const NoiseSchedule& s = default_schedule();
    std::mt19937_64 g(39);
    const TensorGrid mu = normal_grid(g, 6, 6, 3);
    const AnalyticGaussianDenoiser d(s, mu, 0.7);
    const Conditioning cond;
    const int t = 400;
    const double a = s.alpha_bar(t);

    CHECK(max_abs_diff(d.predict(scaled(mu, std::sqrt(a)), t, cond, PromptBranch::positive, {}), TensorGrid(6, 6, 3)) <= 1e-12);

    const TensorGrid z = normal_grid(g, 6, 6, 3);
    const TensorGrid eps = d.predict(z, t, cond, PromptBranch::positive, {});
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double gain = std::sqrt(a) * 0.49 / (a * 0.49 + 1 - a);
        const double x0 = mu.data()[k] + gain * (z.data()[k] - std::sqrt(a) * mu.data()[k]);
        CHECK(eps.data()[k] == doctest::Approx((z.data()[k] - std::sqrt(a) * x0) / std::sqrt(1 - a)).epsilon(1e-12));
    }

    const AnalyticGaussianDenoiser point(s, mu, 1e-9);
    const TensorGrid pe = point.predict(z, t, cond, PromptBranch::positive, {});
    for (std::size_t k = 0; k < z.size(); ++k) {
        CHECK(pe.data()[k] == doctest::Approx((z.data()[k] - std::sqrt(a) * mu.data()[k]) / std::sqrt(1 - a)).epsilon(1e-9));
    }

    // The attend list is ignored; the negative branch only differs when shifted.
    const TensorGrid other = normal_grid(g, 6, 6, 3);
    CHECK(d.predict(z, t, cond, PromptBranch::positive, {&other, &other}) == eps);
    CHECK(d.predict(z, t, cond, PromptBranch::negative, {}) == eps);
    const AnalyticGaussianDenoiser shifted(s, mu, 0.7, 0.3);
    CHECK(shifted.predict(z, t, cond, PromptBranch::negative, {}) != eps);
    CHECK(shifted.predict(z, t, cond, PromptBranch::positive, {}) == eps);

    CHECK_THROWS_AS(AnalyticGaussianDenoiser(s, mu, 0.0), ValidationError);
    CHECK_THROWS_AS(d.predict(TensorGrid(5, 6, 3), t, cond, PromptBranch::positive, {}), ValidationError);
}

TEST_CASE("analytic denoiser: sampling reproduces the data distribution (Monte Carlo)") {
    // Every training step: with eta = 1 the variance falls ~10% short at 200 steps.
    const NoiseSchedule s = schedule_with(1000);
    const int n = 100;
    const double mean = 0.3, sd = 0.5;
    const AnalyticGaussianDenoiser d(s, TensorGrid(n, n, 1, mean), sd);
    const auto steps = s.step_indices();
    const int top = steps.back();
    for (double eta : {0.0, 1.0}) {
        // Start from the exact noisy marginal at the top step.
        const double a_top = s.alpha_bar(top);
        const CounterRng start(77);
        TensorGrid z(n, n, 1);
        for (std::size_t k = 0; k < z.size(); ++k) {
            z.data()[k] = std::sqrt(a_top) * mean + std::sqrt(a_top * sd * sd + 1 - a_top) * start.normal(k);
        }
        const CounterRng rng(78);
        for (std::size_t i = steps.size() - 1; i > 0; --i) {
            const TensorGrid eps = d.predict(z, steps[i], {}, PromptBranch::positive, {});
            z = ddim_step(z, eps, steps[i], steps[i - 1], eta, rng.substream(steps[i]), s).latent;
        }
        double m = 0, m2 = 0;
        for (double v : z.data()) m += v;
        m /= static_cast<double>(z.size());
        for (double v : z.data()) m2 += (v - m) * (v - m);
        m2 /= static_cast<double>(z.size() - 1);
        const double a0 = s.alpha_bar(steps.front());
        const double want_mean = std::sqrt(a0) * mean, want_var = a0 * sd * sd + 1 - a0;
        CAPTURE(eta);
        CHECK(std::abs(m - want_mean) <= 0.05 * want_mean);
        CHECK(std::abs(m2 - want_var) <= 0.05 * want_var);
    }
}

TEST_CASE("generate_video: a single frame passes through untouched") {
    std::mt19937_64 g(40);
    const TensorGrid f0 = testsupport::random_grid(g, 8, 8, 3);
    const AnalyticGaussianDenoiser d(default_schedule(), f0, 10);
    const auto frames = generate_video(f0, {}, {}, d, IdentityCodec(), default_schedule(), {});
    REQUIRE(frames.size() == 1);
    CHECK(frames[0] == f0);
}

TEST_CASE("generate_video: zero flow keeps every frame near the first") {
    const TensorGrid f0 = testsupport::smooth_texture(16, 16, 3, 41);
    const AnalyticGaussianDenoiser d(default_schedule(), f0, 10);
    SamplerParams p;
    p.eta_scalar = 0.0;
    const std::vector<FlowField> flows(4, FlowField(16, 16, FlowConvention::backward));
    const auto frames = generate_video(f0, flows, {}, d, IdentityCodec(), default_schedule(), p);
    REQUIRE(frames.size() == 5);
    for (const auto& f : frames) CHECK(relative_l2(f, f0) <= 1e-2);
}

TEST_CASE("generate_video: unit translation shifts the content") {
    const TensorGrid f0 = testsupport::smooth_texture(32, 32, 3, 42);
    const AnalyticGaussianDenoiser d(default_schedule(), f0, 10);
    const std::vector<FlowField> flows(3, FlowField::constant(32, 32, FlowConvention::backward, 1, 0));
    std::vector<EtaMap> etas;
    for (const auto& f : flows) etas.push_back(derive_eta_map(f));
    const auto frames = generate_video(f0, flows, etas, d, IdentityCodec(), default_schedule(), {});
    for (int f = 1; f < 4; ++f) {
        TensorGrid got(32 - f - 2, 30, 3), want(32 - f - 2, 30, 3);
        for (int y = 1; y < 31; ++y) {
            for (int x = f + 1; x < 31; ++x) {
                for (int c = 0; c < 3; ++c) {
                    got.at(x - f - 1, y - 1, c) = frames[f].at(x, y, c);
                    want.at(x - f - 1, y - 1, c) = f0.at(x - f, y, c);
                }
            }
        }
        CAPTURE(f);
        CHECK(relative_l2(got, want) <= 1e-2);
    }
}

TEST_CASE("generate_video: determinism, seeds, eta equivalence and the inversion ablation") {
    const TensorGrid f0 = testsupport::smooth_texture(16, 16, 3, 43);
    const NoiseSchedule s = schedule_with(50);
    const AnalyticGaussianDenoiser d(s, f0, 1.0, 0.2);
    const std::vector<FlowField> flows(2, FlowField::constant(16, 16, FlowConvention::backward, 0.5, -0.25));
    SamplerParams p;
    p.seed = 9;

    p.eta_scalar = 0.0;
    CHECK(generate_video(f0, flows, {}, d, IdentityCodec(), s, p) == generate_video(f0, flows, {}, d, IdentityCodec(), s, p));

    p.eta_scalar = 0.6;
    const auto a = generate_video(f0, flows, {}, d, IdentityCodec(), s, p);
    CHECK(a == generate_video(f0, flows, {}, d, IdentityCodec(), s, p));
    const std::vector<EtaMap> uniform(2, EtaMap::uniform(16, 16, 0.6));
    SamplerParams spatial = p;
    spatial.eta_scalar.reset();
    CHECK(a == generate_video(f0, flows, uniform, d, IdentityCodec(), s, spatial));

    SamplerParams other = p;
    other.seed = 10;
    CHECK(a != generate_video(f0, flows, {}, d, IdentityCodec(), s, other));

    SamplerParams ablate = p;
    ablate.eta_scalar = 0.0;
    ablate.use_inversion = false;
    p.eta_scalar = 0.0;
    CHECK(generate_video(f0, flows, {}, d, IdentityCodec(), s, p) != generate_video(f0, flows, {}, d, IdentityCodec(), s, ablate));
}

TEST_CASE("generate_video: what the denoiser is asked") {
    const TensorGrid f0 = testsupport::smooth_texture(8, 8, 2, 44);
    const NoiseSchedule s = schedule_with(20);
    const AnalyticGaussianDenoiser inner(s, f0, 1.0);
    const std::vector<FlowField> flows(2, FlowField(8, 8, FlowConvention::backward));
    const int inversion_calls = static_cast<int>(s.steps_to_tau().size()) - 1;

    for (auto [set, width] : {std::pair{AttendSet::self, 1}, std::pair{AttendSet::first, 1},
                              std::pair{AttendSet::previous, 1}, std::pair{AttendSet::first_and_previous, 2}}) {
        for (double gamma : {1.0, 7.5}) {
            SpyDenoiser spy(inner);
            SamplerParams p;
            p.attend = set;
            p.gamma = gamma;
            p.eta_scalar = 0.0;
            generate_video(f0, flows, {}, spy, IdentityCodec(), s, p);
            const int per_frame = inversion_calls + inversion_calls * (gamma == 1.0 ? 1 : 2);
            REQUIRE(static_cast<int>(spy.calls.size()) == 2 * per_frame);
            for (int frame = 0; frame < 2; ++frame) {
                const auto* base = &spy.calls[static_cast<std::size_t>(frame * per_frame)];
                for (int i = 0; i < inversion_calls; ++i) {
                    CHECK(base[i].branch == PromptBranch::positive);
                    CHECK(base[i].attend.size() == 1);
                    CHECK(base[i].attend_self_first);
                    CHECK(base[i].t < s.tau());
                }
                int negatives = 0;
                for (int i = inversion_calls; i < per_frame; ++i) {
                    CHECK(static_cast<int>(base[i].attend.size()) == width);
                    CHECK(base[i].attend_self_first == (set == AttendSet::self));
                    CHECK(base[i].t > 0);
                    if (base[i].branch == PromptBranch::negative) ++negatives;
                }
                CHECK(negatives == (gamma == 1.0 ? 0 : inversion_calls));
            }
        }
    }

    // The first frame's attended latent at a given t is the same for every frame.
    SpyDenoiser spy(inner);
    SamplerParams p;
    p.gamma = 1.0;
    p.eta_scalar = 0.0;
    generate_video(f0, flows, {}, spy, IdentityCodec(), s, p);
    std::map<int, TensorGrid> first_at;
    int compared = 0;
    for (const auto& call : spy.calls) {
        if (call.attend.size() != 2) continue;
        auto [it, fresh] = first_at.emplace(call.t, call.attend[0]);
        if (!fresh) {
            CHECK(it->second == call.attend[0]);
            ++compared;
        }
    }
    CHECK(compared == inversion_calls);
}

TEST_CASE("generate_video: input validation") {
    const TensorGrid f0(8, 8, 1, 0.5);
    const NoiseSchedule s = schedule_with(10);
    const AnalyticGaussianDenoiser d(s, f0, 1.0);
    const std::vector<FlowField> flows(2, FlowField(8, 8, FlowConvention::backward));
    CHECK_THROWS_AS(generate_video(f0, flows, {EtaMap(8, 8)}, d, IdentityCodec(), s, {}), ValidationError);
    SamplerParams p;
    p.eta_scalar = 0.0;
    CHECK_THROWS_AS(generate_video(f0, {FlowField(4, 8, FlowConvention::backward)}, {}, d, IdentityCodec(), s, p),
                    ValidationError);
    p.gamma = -1;
    CHECK_THROWS_AS(generate_video(f0, flows, {}, d, IdentityCodec(), s, p), ValidationError);
    CHECK(parse_attend_set("first_and_previous") == AttendSet::first_and_previous);
    CHECK(std::string(to_string(AttendSet::previous)) == "previous");
    CHECK_THROWS_AS(parse_attend_set("everything"), ValidationError);
}

TEST_CASE("checkpoints: round trip, corruption and resume") {
    std::mt19937_64 g(45);
    LoopState st;
    st.next_frame = 3;
    st.frame_count = 6;
    st.seed = 1234567890123ULL;
    st.first_latent = normal_grid(g, 5, 4, 3);
    st.previous_frame = normal_grid(g, 5, 4, 3);
    const std::string blob = encode_checkpoint(st);
    CHECK(decode_checkpoint(blob) == st);
    CHECK_THROWS_AS(decode_checkpoint(blob.substr(0, blob.size() - 3)), ValidationError);
    CHECK_THROWS_AS(decode_checkpoint("XX" + blob.substr(2)), ValidationError);
    CHECK_THROWS_AS(decode_checkpoint(blob + "x"), ValidationError);

    const TensorGrid f0 = testsupport::smooth_texture(12, 12, 3, 46);
    const NoiseSchedule s = schedule_with(25);
    const AnalyticGaussianDenoiser d(s, f0, 2.0, 0.1);
    SamplerParams p;
    p.seed = 77;
    auto motion = [](int f) {
        FrameMotion m{FlowField::constant(12, 12, FlowConvention::backward, 0.3 * f, 0), EtaMap(12, 12)};
        for (int y = 0; y < 12; ++y) m.eta.set(0, y, 1.0);
        m.eta.set(5, 5, 0.5);
        return m;
    };
    std::vector<TensorGrid> full;
    std::string saved;
    generate_video_streaming(
        f0, 5, motion, d, IdentityCodec(), s, p, [&](int, const TensorGrid& fr) { full.push_back(fr); }, nullptr,
        [&](const LoopState& state) {
            if (state.next_frame == 3) saved = encode_checkpoint(state);
        });
    REQUIRE(full.size() == 5);
    REQUIRE_FALSE(saved.empty());

    const LoopState resume = decode_checkpoint(saved);
    std::map<int, TensorGrid> rest;
    const auto summary = generate_video_streaming(
        f0, 5, motion, d, IdentityCodec(), s, p, [&](int f, const TensorGrid& fr) { rest[f] = fr; }, &resume);
    CHECK(summary.frames_emitted == 2);
    REQUIRE(rest.size() == 2);
    CHECK(rest.at(3) == full[3]);
    CHECK(rest.at(4) == full[4]);

    SamplerParams wrong = p;
    wrong.seed = 78;
    CHECK_THROWS_AS(generate_video_streaming(f0, 5, motion, d, IdentityCodec(), s, wrong,
                                             [](int, const TensorGrid&) {}, &resume),
                    ValidationError);
}
