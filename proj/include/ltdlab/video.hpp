#pragma once

#include "ltdlab/tensor.hpp"

namespace ltd {

/// One conditioning class per synthetic scene kind.
inline constexpr int kNumClasses = 4;
/// Reserved conditioning index meaning "no class" (classifier-free guidance).
inline constexpr int kNullClass = kNumClasses;

/// Pixel-space clip, dims (F, H, W, C), C in {1, 3}, every value in [0, 1].
struct PixelVideo {
    Tensor tensor;

    PixelVideo() = default;
    explicit PixelVideo(Tensor t);

    std::size_t frames() const { return tensor.dim(0); }
    std::size_t height() const { return tensor.dim(1); }
    std::size_t width() const { return tensor.dim(2); }
    std::size_t channels() const { return tensor.dim(3); }
};

/// Latent clip z, dims (F_l, H_l, W_l, C_l).
struct LatentVideo {
    Tensor tensor;

    LatentVideo() = default;
    explicit LatentVideo(Tensor t);

    std::size_t frames() const { return tensor.dim(0); }
    std::size_t height() const { return tensor.dim(1); }
    std::size_t width() const { return tensor.dim(2); }
    std::size_t channels() const { return tensor.dim(3); }
    std::size_t sites() const { return tensor.dim(1) * tensor.dim(2); }
};

}  // namespace ltd
