#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ltdlab/diffusion.hpp"
#include "ltdlab/error.hpp"
#include "test_util.hpp"

using namespace ltd;

namespace {

// Returns the same tensor regardless of input: the exact noise of a q_sample.
class FixedNoise : public NoisePredictor {
public:
    explicit FixedNoise(Tensor eps) : eps_(std::move(eps)) {}
    Tensor predict(const Tensor&, std::size_t, int) const override { return eps_; }

private:
    Tensor eps_;
};

// Conditional and unconditional outputs differ so guidance is observable.
class SplitNoise : public NoisePredictor {
public:
    Tensor predict(const Tensor& z, std::size_t, int cond) const override {
        return add_scalar(scale(z, 0.1), cond == kNullClass ? 0.25 : -0.5);
    }
};

}  // namespace

TEST_CASE("linear schedule") {
    auto one = make_linear_schedule(1, 0.5, 0.5);
    CHECK(one.beta(1) == 0.5);
    CHECK(one.alpha_bar(1) == 0.5);

    auto s = make_linear_schedule(1000, 1e-4, 0.02);
    CHECK(s.beta(1) == 1e-4);
    CHECK(s.beta(1000) == doctest::Approx(0.02).epsilon(1e-15));
    // Oracle: 30-digit product of (1 - beta_t), 4.035829765375683e-05.
    CHECK(s.alpha_bar(1000) == doctest::Approx(4.0358297653756833e-05).epsilon(1e-12));
    for (std::size_t t = 2; t <= 1000; ++t) {
        CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        CHECK(s.beta(t) >= s.beta(t - 1));
    }
    CHECK(s.alpha_bar(1) < 1.0);

    CHECK_THROWS_AS(make_linear_schedule(10, 0.02, 1e-4), InvalidConfig);
    CHECK_THROWS_AS(make_linear_schedule(10, 0.0, 0.1), InvalidConfig);
    CHECK_THROWS_AS(make_linear_schedule(10, 0.1, 1.0), InvalidConfig);
    CHECK_THROWS_AS(make_linear_schedule(0, 0.1, 0.2), InvalidConfig);
}

TEST_CASE("q_sample closed form") {
    NoiseSchedule quarter(0.75, 0.75, {0.75});  // alpha_bar(1) = 0.25
    Tensor z0(Shape{1}, 2.0), eps(Shape{1}, -1.0);
    // Oracle: sqrt(0.25)*2 + sqrt(0.75)*(-1) = 1 - 0.8660254037844386
    CHECK(std::abs(q_sample(z0, 1, eps, quarter)[0] - 0.1339745962155614) <= 1e-12);

    auto s = make_linear_schedule();
    Rng rng(1);
    Tensor e = sample_gaussian(rng, Shape{4, 4});
    Tensor zero(Shape{4, 4}, 0.0);
    auto zt = q_sample(zero, 500, e, s);
    for (std::size_t i = 0; i < e.numel(); ++i) CHECK(zt[i] == std::sqrt(1.0 - s.alpha_bar(500)) * e[i]);

    Tensor x0 = sample_gaussian(rng, Shape{4, 4});
    auto near = q_sample(x0, 1, e, s);
    double max_eps = 0.0;
    for (double v : e.data()) max_eps = std::max(max_eps, std::abs(v));
    for (std::size_t i = 0; i < e.numel(); ++i) {
        CHECK(std::abs(near[i] - x0[i]) <= std::sqrt(1.0 - s.alpha_bar(1)) * max_eps + (1.0 - std::sqrt(s.alpha_bar(1))) * std::abs(x0[i]) + 1e-15);
    }

    CHECK_THROWS_AS(q_sample(x0, 1, Tensor(Shape{16}, 0.0), s), InvalidShape);
    CHECK_THROWS_AS(q_sample(x0, 1001, e, s), InvalidInput);
}

TEST_CASE("q_sample variance tracks 1 - alpha_bar") {
    auto s = make_linear_schedule();
    Rng rng(12);
    for (std::size_t t : {10u, 300u, 999u}) {
        Tensor e = sample_gaussian(rng, Shape{100000});
        auto zt = q_sample(Tensor(Shape{100000}, 0.0), t, e, s);
        double var = 0.0;
        for (double v : zt.data()) var += v * v;
        var /= 1e5;
        CHECK(std::abs(var / (1.0 - s.alpha_bar(t)) - 1.0) < 0.03);
    }
}

TEST_CASE("diffusion loss") {
    Tensor a(Shape{2}, 0.0), b(Shape{2}, 1.0);
    CHECK(diffusion_loss(a, b) == 1.0);
    CHECK(diffusion_loss(b, b) == 0.0);
    Rng rng(3);
    Tensor x = testing::random_tensor(rng, Shape{2, 2, 2, 2});
    Tensor y = testing::random_tensor(rng, Shape{2, 2, 2, 2});
    double oracle = 0.0;
    for (std::size_t i = 0; i < 16; ++i) oracle += (x[i] - y[i]) * (x[i] - y[i]);
    oracle /= 16.0;
    CHECK(testing::rel_err(diffusion_loss(x, y), oracle) < 1e-15);
    CHECK_THROWS_AS(diffusion_loss(x, a), InvalidShape);
}

TEST_CASE("ltd loss") {
    Rng rng(4);
    Tensor eps = testing::random_tensor(rng, Shape{3, 2, 2, 2});
    Tensor pred = testing::random_tensor(rng, Shape{3, 2, 2, 2});

    SUBCASE("zero discrepancy doubles the loss") {
        auto l = ltd_loss(eps, pred, DiscrepancyTensor(Tensor(Shape{3, 2, 2}, 0.0)));
        CHECK(l.total == 2.0 * l.unweighted);
        CHECK(l.unweighted == diffusion_loss(eps, pred));
    }
    SUBCASE("single voxel with D = e^2 - e") {
        Tensor e1(Shape{1, 1, 1, 1}, 1.0), p1(Shape{1, 1, 1, 1}, 0.0);
        double d = std::exp(2.0) - std::numbers::e;
        auto l = ltd_loss(e1, p1, DiscrepancyTensor(Tensor(Shape{1, 1, 1}, d)));
        CHECK(l.total == doctest::Approx(3.0).epsilon(1e-14));
    }
    SUBCASE("total >= 2 * unweighted, strict increase only where error is nonzero") {
        Tensor d(Shape{3, 2, 2});
        for (auto& v : d.data()) v = std::abs(rng.gaussian());
        auto base = ltd_loss(eps, pred, DiscrepancyTensor(d));
        CHECK(base.total >= 2.0 * base.unweighted);
        Tensor d2 = d;
        d2[5] += 1.0;
        CHECK(ltd_loss(eps, pred, DiscrepancyTensor(d2)).total > base.total);

        Tensor masked = pred;
        for (std::size_t c = 0; c < 2; ++c) masked[5 * 2 + c] = eps[5 * 2 + c];
        CHECK(ltd_loss(eps, masked, DiscrepancyTensor(d2)).total == ltd_loss(eps, masked, DiscrepancyTensor(d)).total);
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(ltd_loss(eps, pred, DiscrepancyTensor(Tensor(Shape{3, 2, 1}, 0.0))), InvalidShape);
    }
}

TEST_CASE("ddim timesteps") {
    auto ts = ddim_timesteps(50, 1000);
    CHECK(ts.size() == 50);
    CHECK(ts.front() == 1000);
    CHECK(ts.back() == 1);
    for (std::size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] < ts[i - 1]);
    CHECK(ddim_timesteps(1, 1000) == std::vector<std::size_t>{1000});
    CHECK(ddim_timesteps(3, 5) == std::vector<std::size_t>{5, 3, 1});
    CHECK(ddim_timesteps(1000, 1000).size() == 1000);
    CHECK_THROWS_AS(ddim_timesteps(0, 1000), InvalidConfig);
    CHECK_THROWS_AS(ddim_timesteps(1001, 1000), InvalidConfig);
}

TEST_CASE("single-step clean reconstruction inverts q_sample") {
    auto s = make_linear_schedule();
    Rng rng(5);
    Tensor z0 = testing::random_tensor(rng, Shape{2, 3, 3, 2});
    Tensor eps = testing::random_tensor(rng, Shape{2, 3, 3, 2});
    for (std::size_t t : {1u, 50u, 500u, 1000u}) {
        auto zt = q_sample(z0, t, eps, s);
        auto rec = predict_clean(zt, eps, s.alpha_bar(t));
        for (std::size_t i = 0; i < z0.numel(); ++i) CHECK(testing::rel_err(rec[i], z0[i]) < 1e-10);
    }
}

TEST_CASE("guidance scale 0 returns the unconditional prediction") {
    Rng rng(6);
    Tensor u = testing::random_tensor(rng, Shape{5});
    Tensor c = testing::random_tensor(rng, Shape{5});
    CHECK(guided_noise(u, c, 0.0) == u);
    auto full = guided_noise(u, c, 1.0);
    for (std::size_t i = 0; i < 5; ++i) CHECK(full[i] == doctest::Approx(c[i]).epsilon(1e-15));
}

TEST_CASE("ddim with a constant-noise model keeps the first clean estimate") {
    auto s = make_linear_schedule();
    Shape shape{2, 2, 2, 1};
    Rng noise_rng(9);
    FixedNoise oracle(testing::random_tensor(noise_rng, shape));
    for (std::size_t steps : {50u, 1000u}) {
        Rng rng(3);
        DdimTrace trace;
        SamplerConfig cfg{steps, 7.5, kNullClass};
        auto out = ddim_sample(oracle, shape, 1, cfg, s, rng, &trace);
        REQUIRE(trace.clean_estimates.size() == trace.timesteps.size());
        const auto& first = trace.clean_estimates.front();
        for (std::size_t i = 0; i < first.numel(); ++i) CHECK(testing::rel_err(out.tensor[i], first[i]) < 1e-9);
    }
}

TEST_CASE("ddim sampling is deterministic and honours guidance") {
    auto s = make_linear_schedule(100);
    SplitNoise model;
    Shape shape{2, 2, 2, 2};
    SamplerConfig cfg{10, 7.5, kNullClass};
    Rng a(1), b(1);
    CHECK(ddim_sample(model, shape, 2, cfg, s, a).tensor == ddim_sample(model, shape, 2, cfg, s, b).tensor);

    cfg.guidance_scale = 0.0;
    Rng c(1), d(1);
    auto g0 = ddim_sample(model, shape, 2, cfg, s, c).tensor;
    auto g0_other_class = ddim_sample(model, shape, 3, cfg, s, d).tensor;
    CHECK(g0 == g0_other_class);

    cfg.guidance_scale = -1.0;
    Rng e(1);
    CHECK_THROWS_AS(ddim_sample(model, shape, 2, cfg, s, e), InvalidConfig);
}
