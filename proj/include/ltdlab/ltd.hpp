#pragma once

#include <cstddef>
#include <filesystem>
#include <string_view>
#include <utility>
#include <vector>

#include "ltdlab/video.hpp"

namespace ltd {

enum class ChannelNorm { L2, L1 };

ChannelNorm parse_channel_norm(std::string_view name);
std::string_view to_string(ChannelNorm norm);

struct LtdConfig {
    std::size_t tau = 3;
    ChannelNorm norm = ChannelNorm::L2;
};

void validate(const LtdConfig& cfg);

/// Per-voxel discrepancy D, dims (F_l, H_l, W_l), every element >= 0.
struct DiscrepancyTensor {
    Tensor tensor;

    DiscrepancyTensor() = default;
    explicit DiscrepancyTensor(Tensor t);

    std::size_t frames() const { return tensor.dim(0); }
};

/// Loss weight ln(e + D), dims (F_l, H_l, W_l), every element >= 1.
struct WeightTensor {
    Tensor tensor;
};

/// Inclusive 1-based window [L_f, R_f] around frame f:
/// L_f = max(1, f - floor(tau/2)), R_f = min(F_l, f + floor(tau/2)).
std::pair<std::size_t, std::size_t> window_bounds(std::size_t f, std::size_t num_frames, std::size_t tau);

/// D_f(h,w) = 1/(R_f - L_f) * sum_{i=L_f}^{R_f-1} |z(i+1,h,w,:) - z(i,h,w,:)|,
/// with the channel norm from cfg. Empty windows (R_f == L_f) give 0.
/// Consecutive-frame norms are computed once and shared between windows.
DiscrepancyTensor ltd_map(const LatentVideo& z, const LtdConfig& cfg);

/// Literal nested-loop evaluation of the same formula, recomputing every
/// frame difference inside every window. Reference for ltd_map.
DiscrepancyTensor ltd_map_bruteforce(const LatentVideo& z, const LtdConfig& cfg);

/// ln(e + D) elementwise; throws InvalidInput on a negative element.
WeightTensor weight_map(const DiscrepancyTensor& d);

/// Replicates a rank-3 (F,H,W) map across a new trailing channel axis.
Tensor broadcast_weight(const Tensor& frames_map, std::size_t channels);
inline Tensor broadcast_weight(const WeightTensor& w, std::size_t channels) {
    return broadcast_weight(w.tensor, channels);
}

/// Per-frame spatial mean of a rank-3 map.
std::vector<double> frame_means(const Tensor& frames_map);

struct FrameRange {
    double min = 0.0;
    double max = 0.0;
};

/// Writes one binary PGM (P5, maxval 255) per frame of a rank-3 map as
/// frame_NNN.pgm, each frame min-max normalized on its own (a flat frame
/// renders black), plus normalization.txt listing "frame min max" per line.
std::vector<FrameRange> write_heatmaps(const Tensor& frames_map, const std::filesystem::path& dir);

}  // namespace ltd
