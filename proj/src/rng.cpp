#include "ltdlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace ltd {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(seed ^ mix64(stream + kGamma))) {}

Rng Rng::split(std::uint64_t substream) const {
    return Rng(seed_, mix64(stream_ * kGamma + substream + 1));
}

std::uint64_t Rng::next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
}

double Rng::uniform() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

double Rng::gaussian() {
    if (spare_) {
        double v = *spare_;
        spare_.reset();
        return v;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
}

Tensor sample_gaussian(Rng& rng, const Shape& dims) {
    Tensor out(dims);
    for (auto& v : out.data()) v = rng.gaussian();
    return out;
}

}  // namespace ltd
