#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "ltdlab/error.hpp"
#include "ltdlab/ltd.hpp"
#include "test_util.hpp"

using namespace ltd;

namespace {

LatentVideo single_voxel(std::vector<double> values) {
    const std::size_t n = values.size();
    return LatentVideo(Tensor(Shape{n, 1, 1, 1}, std::move(values)));
}

LatentVideo random_latent(Rng& rng, const Shape& shape) {
    return LatentVideo(testing::random_tensor(rng, shape));
}

// Values on a 1/1024 grid so adding a small integer is exact.
LatentVideo grid_latent(Rng& rng, const Shape& shape) {
    Tensor t(shape);
    for (auto& v : t.data()) v = std::round(rng.gaussian() * 1024.0) / 1024.0;
    return LatentVideo(std::move(t));
}

}  // namespace

TEST_CASE("window bounds") {
    CHECK(window_bounds(1, 8, 3) == std::pair<std::size_t, std::size_t>{1, 2});
    CHECK(window_bounds(4, 8, 3) == std::pair<std::size_t, std::size_t>{3, 5});
    CHECK(window_bounds(8, 8, 3) == std::pair<std::size_t, std::size_t>{7, 8});
    CHECK(window_bounds(1, 1, 3) == std::pair<std::size_t, std::size_t>{1, 1});
    CHECK(window_bounds(4, 8, 1) == std::pair<std::size_t, std::size_t>{4, 4});
    CHECK(window_bounds(3, 8, 5) == std::pair<std::size_t, std::size_t>{1, 5});
    for (std::size_t F = 1; F <= 6; ++F)
        for (std::size_t tau = 1; tau <= 7; ++tau)
            for (std::size_t f = 1; f <= F; ++f) {
                auto [lo, hi] = window_bounds(f, F, tau);
                CHECK(lo <= f);
                CHECK(f <= hi);
                CHECK(lo >= 1);
                CHECK(hi <= F);
            }
}

TEST_CASE("hand-evaluated fixtures") {
    LtdConfig cfg;  // tau 3, L2
    SUBCASE("two frames") {
        auto d = ltd_map(single_voxel({0.0, 3.0}), cfg);
        CHECK(d.tensor[0] == 3.0);
        CHECK(d.tensor[1] == 3.0);
    }
    SUBCASE("three frames 0, 1, 4") {
        // f=1: |1-0| / 1; f=2: (|1-0| + |4-1|) / 2; f=3: |4-1| / 1
        auto d = ltd_map(single_voxel({0.0, 1.0, 4.0}), cfg);
        CHECK(std::abs(d.tensor[0] - 1.0) <= 1e-12);
        CHECK(std::abs(d.tensor[1] - 2.0) <= 1e-12);
        CHECK(std::abs(d.tensor[2] - 3.0) <= 1e-12);
    }
    SUBCASE("single frame is zero") {
        CHECK(ltd_map(single_voxel({5.0}), cfg).tensor[0] == 0.0);
    }
    SUBCASE("channel norms") {
        LatentVideo z(Tensor(Shape{2, 1, 1, 2}, std::vector<double>{0, 0, 3, -4}));
        CHECK(ltd_map(z, {3, ChannelNorm::L2}).tensor[0] == 5.0);
        CHECK(ltd_map(z, {3, ChannelNorm::L1}).tensor[0] == 7.0);
    }
}

TEST_CASE("static latent gives zero discrepancy") {
    Rng rng(2);
    Tensor frame = testing::random_tensor(rng, Shape{1, 4, 4, 3});
    Tensor z(Shape{6, 4, 4, 3});
    for (std::size_t i = 0; i < z.numel(); ++i) z[i] = frame[i % frame.numel()];
    for (auto norm : {ChannelNorm::L2, ChannelNorm::L1}) {
        CHECK(ltd_map(LatentVideo(z), {3, norm}).tensor == Tensor(Shape{6, 4, 4}, 0.0));
        CHECK(ltd_map_bruteforce(LatentVideo(z), {3, norm}).tensor == Tensor(Shape{6, 4, 4}, 0.0));
    }
}

TEST_CASE("tau 1 collapses every window") {
    Rng rng(3);
    auto z = random_latent(rng, Shape{5, 2, 2, 2});
    CHECK(ltd_map_bruteforce(z, {1, ChannelNorm::L2}).tensor == Tensor(Shape{5, 2, 2}, 0.0));
    CHECK(ltd_map(z, {1, ChannelNorm::L2}).tensor == Tensor(Shape{5, 2, 2}, 0.0));
}

TEST_CASE("fast path equals brute force bit for bit") {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        auto z = random_latent(rng, Shape{5, 4, 4, 3});
        for (std::size_t tau : {1, 2, 3, 5})
            for (auto norm : {ChannelNorm::L2, ChannelNorm::L1}) {
                REQUIRE(ltd_map(z, {tau, norm}).tensor == ltd_map_bruteforce(z, {tau, norm}).tensor);
            }
    }
}

TEST_CASE("homogeneity and translation invariance") {
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        auto z = grid_latent(rng, Shape{6, 3, 3, 4});
        for (auto norm : {ChannelNorm::L2, ChannelNorm::L1}) {
            LtdConfig cfg{3, norm};
            auto base = ltd_map(z, cfg).tensor;
            for (double k : {0.5, 2.0, 10.0}) {
                auto scaled = ltd_map(LatentVideo(scale(z.tensor, k)), cfg).tensor;
                for (std::size_t i = 0; i < base.numel(); ++i) {
                    CHECK(std::abs(scaled[i] - k * base[i]) <= 1e-9 * std::max(1e-300, std::abs(k * base[i])));
                }
            }
            for (double c : {-3.0, 1.0, 7.0}) {
                CHECK(ltd_map(LatentVideo(add_scalar(z.tensor, c)), cfg).tensor == base);
            }
        }
    }
}

TEST_CASE("locality and window support") {
    Rng rng(8);
    auto z = random_latent(rng, Shape{9, 3, 3, 2});
    for (std::size_t tau : {1, 3, 5}) {
        LtdConfig cfg{tau, ChannelNorm::L2};
        auto base = ltd_map(z, cfg).tensor;
        const std::size_t g = 4, h = 1, w = 2;
        Tensor bumped = z.tensor;
        bumped.at(g, h, w, 0) += 0.75;
        auto d = ltd_map(LatentVideo(bumped), cfg).tensor;
        const std::size_t reach = tau / 2 + 1;
        for (std::size_t f = 0; f < 9; ++f)
            for (std::size_t y = 0; y < 3; ++y)
                for (std::size_t x = 0; x < 3; ++x) {
                    bool same_site = y == h && x == w;
                    bool in_reach = (f > g ? f - g : g - f) <= reach;
                    if (!same_site || !in_reach) CHECK(d.at(f, y, x) == base.at(f, y, x));
                }
    }
}

TEST_CASE("weight map") {
    auto w = weight_map(DiscrepancyTensor(Tensor(Shape{1, 1, 3}, std::vector<double>{0.0, 4.670774270471604, 10.0})));
    CHECK(std::abs(w.tensor[0] - 1.0) <= 2.3e-16);
    CHECK(w.tensor[1] == doctest::Approx(2.0).epsilon(1e-14));
    // Oracle: ln(e + 10) = 2.5430404724093343
    CHECK(w.tensor[2] == doctest::Approx(2.5430404724093343).epsilon(1e-15));
    CHECK_THROWS_AS(weight_map(DiscrepancyTensor(Tensor(Shape{1, 1, 1}, -1e-9))), InvalidInput);
}

TEST_CASE("weight floor is attained exactly where D is zero") {
    Rng rng(10);
    Tensor d(Shape{4, 3, 3});
    for (auto& v : d.data()) v = std::abs(rng.gaussian());
    auto w = weight_map(DiscrepancyTensor(d));
    double mn = *std::min_element(w.tensor.data().begin(), w.tensor.data().end());
    CHECK(mn > 1.0);
    d[5] = 0.0;
    w = weight_map(DiscrepancyTensor(d));
    mn = *std::min_element(w.tensor.data().begin(), w.tensor.data().end());
    CHECK(mn == std::log(std::numbers::e));
    for (std::size_t i = 0; i + 1 < d.numel(); ++i) {
        if (d[i] < d[i + 1]) CHECK(w.tensor[i] < w.tensor[i + 1]);
    }
}

TEST_CASE("broadcast_weight replicates across channels") {
    auto d = ltd_map(single_voxel({0.0, 1.0, 4.0}), LtdConfig{});
    auto w = weight_map(d);
    auto b = broadcast_weight(w, 2);
    CHECK(b.shape() == Shape{3, 1, 1, 2});
    const double expected[3] = {std::log(std::numbers::e + 1.0), std::log(std::numbers::e + 2.0),
                                std::log(std::numbers::e + 3.0)};
    for (std::size_t f = 0; f < 3; ++f) {
        CHECK(b.at(f, 0, 0, 0) == doctest::Approx(expected[f]).epsilon(1e-15));
        CHECK(b.at(f, 0, 0, 1) == b.at(f, 0, 0, 0));
    }
    auto one = broadcast_weight(w, 1);
    for (std::size_t i = 0; i < 3; ++i) CHECK(one[i] == w.tensor[i]);
}

TEST_CASE("heatmaps are per-frame normalised PGMs with a sidecar") {
    testing::TempDir dir("heat");
    Tensor map(Shape{2, 2, 3}, std::vector<double>{0, 1, 2, 3, 4, 5, 7, 7, 7, 7, 7, 7});
    auto ranges = write_heatmaps(map, dir.path());
    REQUIRE(ranges.size() == 2);
    CHECK(ranges[0].min == 0.0);
    CHECK(ranges[0].max == 5.0);

    auto bytes = testing::read_bytes(dir / "frame_000.pgm");
    std::string header = "P5\n3 2\n255\n";
    REQUIRE(bytes.size() == header.size() + 6);
    CHECK(std::string(bytes.begin(), bytes.begin() + header.size()) == header);
    const unsigned char expected[6] = {0, 51, 102, 153, 204, 255};
    for (int i = 0; i < 6; ++i) CHECK(static_cast<unsigned char>(bytes[header.size() + i]) == expected[i]);

    auto flat = testing::read_bytes(dir / "frame_001.pgm");
    for (std::size_t i = header.size(); i < flat.size(); ++i) CHECK(flat[i] == 0);

    std::ifstream side(dir / "normalization.txt");
    std::string comment;
    std::getline(side, comment);
    std::size_t f;
    double mn, mx;
    side >> f >> mn >> mx;
    CHECK(f == 0);
    CHECK(mn == 0.0);
    CHECK(mx == 5.0);
}
