#pragma once

#include <cstdint>
#include <optional>

#include "ltdlab/tensor.hpp"

namespace ltd {

/// Counter-based generator: output i of stream s under seed k is a pure
/// function mix(key(k, s) + (i + 1) * gamma), so streams never overlap and
/// the sequence is identical on every platform. Not thread-safe.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    /// Independent generator on a derived stream of the same seed.
    Rng split(std::uint64_t substream) const;

    std::uint64_t next_u64();
    /// Uniform in (0, 1].
    double uniform();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    /// Standard normal via Box-Muller; the second value of each pair is cached.
    double gaussian();

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::optional<double> spare_;
};

std::uint64_t mix64(std::uint64_t x);

/// i.i.d. standard normals in row-major order. Throws InvalidShape on zero extents.
Tensor sample_gaussian(Rng& rng, const Shape& dims);

}  // namespace ltd
