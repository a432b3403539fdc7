#include <doctest.h>

#include <cmath>

#include "ltdlab/denoiser.hpp"
#include "ltdlab/error.hpp"
#include "test_util.hpp"

using namespace ltd;

namespace {

DenoiserArch tiny_arch() {
    DenoiserArch a;
    a.frames = 1;
    a.height = 2;
    a.width = 2;
    a.channels = 2;
    return a;
}

TrainBatch random_batch(const DenoiserArch& arch, Rng& rng, std::size_t n, std::size_t timesteps) {
    TrainBatch batch;
    for (std::size_t i = 0; i < n; ++i) {
        TrainExample ex;
        ex.z0 = LatentVideo(testing::random_tensor(rng, arch.latent_shape()));
        ex.d = ltd_map(ex.z0, LtdConfig{});
        // Give single-frame geometries a nonzero D so the weights matter.
        for (auto& v : ex.d.tensor.data()) v += std::abs(rng.gaussian());
        ex.t = 1 + rng.below(timesteps);
        ex.eps = sample_gaussian(rng, arch.latent_shape());
        ex.cond = static_cast<int>(rng.below(arch.num_classes + 1));
        batch.push_back(std::move(ex));
    }
    return batch;
}

}  // namespace

TEST_CASE("layout tiles the parameter vector") {
    DenoiserArch arch;
    auto layout = make_layout(arch);
    std::size_t offset = 0;
    for (const auto& b : layout) {
        CHECK(b.offset == offset);
        offset += b.size();
    }
    Rng rng(1);
    auto p = init_params(arch, rng);
    CHECK(p.values.size() == offset);
    CHECK(p.block("cond.table").rows == arch.num_classes + 1);
    CHECK(p.block("layer0.weight").cols == arch.channels + arch.time_dim + arch.cond_dim);
}

TEST_CASE("init is seeded with zero biases and 1/fan_in weight variance") {
    DenoiserArch arch;
    Rng a(3), b(3);
    auto p = init_params(arch, a);
    CHECK(p.values == init_params(arch, b).values);
    for (const auto& blk : p.layout) {
        auto v = p.view(blk.name);
        if (blk.name.ends_with(".bias")) {
            for (double x : v) CHECK(x == 0.0);
        }
        if (blk.name.ends_with(".weight") && blk.size() >= 1000) {
            double mean = 0.0, var = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            for (double x : v) var += (x - mean) * (x - mean);
            var /= static_cast<double>(v.size());
            double target = 1.0 / static_cast<double>(blk.cols);
            CHECK(std::abs(var / target - 1.0) < 0.2);
        }
    }
}

TEST_CASE("forward contract") {
    DenoiserArch arch;
    arch.frames = 3;
    arch.height = 2;
    arch.width = 4;
    arch.channels = 3;
    Rng rng(4);
    auto p = init_params(arch, rng);
    Tensor z = testing::random_tensor(rng, arch.latent_shape());

    SUBCASE("zero params give zero output") {
        DenoiserParams zero = p;
        std::fill(zero.values.begin(), zero.values.end(), 0.0);
        CHECK(forward(arch, zero, z, 10, 1) == Tensor(z.shape(), 0.0));
    }
    SUBCASE("output shape matches input and is deterministic") {
        auto out = forward(arch, p, z, 10, 1);
        CHECK(out.shape() == z.shape());
        CHECK(out == forward(arch, p, z, 10, 1));
    }
    SUBCASE("swapping two sites swaps their outputs") {
        auto out = forward(arch, p, z, 77, 2);
        Tensor swapped = z;
        for (std::size_t c = 0; c < 3; ++c) std::swap(swapped.at(0, 0, 1, c), swapped.at(2, 1, 3, c));
        auto out2 = forward(arch, p, swapped, 77, 2);
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(out2.at(0, 0, 1, c) == out.at(2, 1, 3, c));
            CHECK(out2.at(2, 1, 3, c) == out.at(0, 0, 1, c));
            CHECK(out2.at(1, 1, 1, c) == out.at(1, 1, 1, c));
        }
    }
    SUBCASE("geometry and label checks") {
        CHECK_THROWS_AS(forward(arch, p, Tensor(Shape{3, 2, 4, 2}, 0.0), 1, 0), InvalidShape);
        CHECK_THROWS_AS(forward(arch, p, z, 1, 5), InvalidInput);
    }
}

TEST_CASE("perfect predictions give zero loss and zero gradient") {
    DenoiserArch arch = tiny_arch();
    DenoiserParams p;
    p.layout = make_layout(arch);
    p.values.assign(p.layout.back().offset + p.layout.back().size(), 0.0);
    Rng rng(5);
    auto batch = random_batch(arch, rng, 2, 1000);
    for (auto& ex : batch) ex.eps = Tensor(ex.eps.shape(), 0.0);
    auto lg = loss_and_grad(arch, p, batch, make_linear_schedule(), true);
    CHECK(lg.loss == 0.0);
    for (double g : lg.grad) CHECK(g == 0.0);
}

TEST_CASE("static batch under the LTD loss doubles the plain loss") {
    DenoiserArch arch = tiny_arch();
    arch.frames = 3;
    Rng rng(6);
    auto p = init_params(arch, rng);
    auto batch = random_batch(arch, rng, 3, 1000);
    for (auto& ex : batch) ex.d = DiscrepancyTensor(Tensor(ex.d.tensor.shape(), 0.0));
    auto lg = loss_and_grad(arch, p, batch, make_linear_schedule(), true);
    CHECK(lg.loss == 2.0 * lg.unweighted_loss);
    auto plain = loss_and_grad(arch, p, batch, make_linear_schedule(), false);
    CHECK(plain.loss == lg.unweighted_loss);
    for (std::size_t i = 0; i < plain.grad.size(); ++i) CHECK(lg.grad[i] == 2.0 * plain.grad[i]);
}

TEST_CASE("per-frame loss averages to the unweighted loss") {
    DenoiserArch arch = tiny_arch();
    arch.frames = 4;
    Rng rng(7);
    auto p = init_params(arch, rng);
    auto batch = random_batch(arch, rng, 3, 1000);
    auto lg = loss_and_grad(arch, p, batch, make_linear_schedule(), true);
    double mean = 0.0;
    for (double v : lg.per_frame_loss) mean += v;
    mean /= 4.0;
    CHECK(std::abs(mean - lg.unweighted_loss) <= 1e-12 * lg.unweighted_loss);
}

TEST_CASE("analytic gradient matches central differences") {
    DenoiserArch arch = tiny_arch();
    auto sched = make_linear_schedule();
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Rng rng(seed);
        auto p = init_params(arch, rng);
        auto batch = random_batch(arch, rng, 2, 1000);
        for (bool use_ltd : {false, true}) {
            CHECK(finite_diff_check(arch, p, batch, sched, use_ltd, 200, 1e-5, seed) < 1e-4);
        }
    }
}

TEST_CASE("finite differences degrade with a large step") {
    DenoiserArch arch = tiny_arch();
    Rng rng(11);
    auto p = init_params(arch, rng);
    auto batch = random_batch(arch, rng, 2, 1000);
    auto sched = make_linear_schedule();
    double fine = finite_diff_check(arch, p, batch, sched, true, 100, 1e-5, 1);
    double coarse = finite_diff_check(arch, p, batch, sched, true, 100, 1e-1, 1);
    CHECK(coarse > 10.0 * fine);
    CHECK(coarse > 1e-4);
}

TEST_CASE("LTD weights add no gradient path") {
    DenoiserArch arch = tiny_arch();
    arch.frames = 3;
    Rng rng(12);
    auto p = init_params(arch, rng);
    auto batch = random_batch(arch, rng, 2, 1000);
    auto sched = make_linear_schedule();
    auto lg = loss_and_grad(arch, p, batch, sched, true);

    // Frozen weights computed outside the engine.
    std::vector<WeightedExample> frozen;
    for (const auto& ex : batch) {
        Tensor w(ex.z0.tensor.shape());
        for (std::size_t f = 0; f < arch.frames; ++f)
            for (std::size_t h = 0; h < arch.height; ++h)
                for (std::size_t x = 0; x < arch.width; ++x)
                    for (std::size_t c = 0; c < arch.channels; ++c)
                        w.at(f, h, x, c) = 1.0 + std::log(std::exp(1.0) + ex.d.tensor.at(f, h, x));
        frozen.push_back({q_sample(ex.z0.tensor, ex.t, ex.eps, sched), ex.t, ex.cond, ex.eps, w});
    }
    auto ref = weighted_loss_and_grad(arch, p, frozen);
    CHECK(std::abs(lg.loss - ref.loss) <= 1e-12 * ref.loss);
    for (std::size_t i = 0; i < ref.grad.size(); ++i) CHECK(std::abs(lg.grad[i] - ref.grad[i]) <= 1e-12);
}

TEST_CASE("adam") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        std::vector<double> p{1.0, -2.0, 3.0};
        std::vector<double> g(3, 0.0);
        AdamState s;
        adam_step(p, g, s, 0.1);
        CHECK(p == std::vector<double>{1.0, -2.0, 3.0});
    }
    SUBCASE("first step moves each coordinate by about lr against the gradient") {
        std::vector<double> p{0.0, 0.0, 0.0};
        std::vector<double> g{3.0, -0.02, 1e-3};
        AdamState s;
        adam_step(p, g, s, 0.01);
        CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
        CHECK(p[1] == doctest::Approx(0.01).epsilon(1e-6));
        CHECK(p[2] == doctest::Approx(-0.01).epsilon(1e-4));
    }
    SUBCASE("three-step trace on a quadratic matches a scalar oracle") {
        // f(x, y) = 2 x^2 + 0.5 y^2, grad = (4x, y)
        std::vector<double> p{1.0, -3.0};
        AdamState s;
        double ox[2] = {1.0, -3.0}, om[2] = {0, 0}, ov[2] = {0, 0};
        for (int step = 1; step <= 3; ++step) {
            std::vector<double> g{4.0 * p[0], p[1]};
            adam_step(p, g, s, 0.05);
            for (int i = 0; i < 2; ++i) {
                double gi = i == 0 ? 4.0 * ox[0] : ox[1];
                om[i] = 0.9 * om[i] + 0.1 * gi;
                ov[i] = 0.999 * ov[i] + 0.001 * gi * gi;
                double mh = om[i] / (1.0 - std::pow(0.9, step));
                double vh = ov[i] / (1.0 - std::pow(0.999, step));
                ox[i] -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
            }
            CHECK(std::abs(p[0] - ox[0]) <= 1e-12);
            CHECK(std::abs(p[1] - ox[1]) <= 1e-12);
        }
    }
    SUBCASE("size mismatch") {
        std::vector<double> p(2), g(3);
        AdamState s;
        CHECK_THROWS_AS(adam_step(p, g, s, 0.1), InvalidShape);
    }
}

TEST_CASE("adam descends on a fixed single-example batch") {
    DenoiserArch arch = tiny_arch();
    arch.frames = 2;
    arch.hidden_width = 16;
    Rng rng(13);
    auto p = init_params(arch, rng);
    auto batch = random_batch(arch, rng, 1, 1000);
    auto sched = make_linear_schedule();
    for (bool use_ltd : {false, true}) {
        auto params = p;
        AdamState s;
        double prev = loss_and_grad(arch, params, batch, sched, use_ltd).loss;
        const double start = prev;
        int bumps = 0;
        for (int i = 0; i < 50; ++i) {
            auto lg = loss_and_grad(arch, params, batch, sched, use_ltd);
            adam_step(params.values, lg.grad, s, 1e-3);
            double now = loss_and_grad(arch, params, batch, sched, use_ltd).loss;
            if (!(now < prev)) ++bumps;
            prev = now;
        }
        CHECK(bumps <= 2);
        CHECK(prev < start);
    }
}

TEST_CASE("checkpoint round trip is exact") {
    testing::TempDir dir("ckpt");
    Checkpoint c;
    c.arch = tiny_arch();
    Rng rng(14);
    c.params = init_params(c.arch, rng);
    c.train_step = 17;
    c.extra["mode"] = "ltd";
    save_checkpoint(c, dir / "m.ltdt");
    auto back = load_checkpoint(dir / "m.ltdt");
    CHECK(back.params.values == c.params.values);
    CHECK(back.train_step == 17);
    CHECK(back.arch.channels == 2);
    CHECK(back.extra.at("mode") == "ltd");
    CHECK(back.beta_end == kDefaultBetaEnd);
}
