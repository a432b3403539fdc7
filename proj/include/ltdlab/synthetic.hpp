#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ltdlab/video.hpp"

namespace ltd {

enum class SceneKind : int { Static = 0, MovingSquare = 1, Flicker = 2, MixedSegments = 3 };

std::string_view to_string(SceneKind kind);
SceneKind parse_scene_kind(std::string_view name);

inline constexpr double kBackground = 0.1;
inline constexpr double kForeground = 1.0;

struct SceneSpec {
    SceneKind kind = SceneKind::Static;
    std::size_t frames = 16;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t channels = 1;

    std::size_t square_size = 8;
    // Pixels per frame; x is the column axis. Positions are rounded and
    // clamped so the square never leaves the frame.
    double velocity_x = 1.0;
    double velocity_y = 0.0;
    // Top-left corner at frame 0; drawn from the seed when unset.
    std::optional<double> start_x;
    std::optional<double> start_y;

    double flicker_amplitude = 0.3;
    double flicker_period = 8.0;

    // Segment start frames for MixedSegments. Segments alternate static,
    // moving, static, ... beginning with a static segment on [0, b0); a
    // leading 0 therefore makes the clip start with motion.
    std::vector<std::size_t> boundaries{8};

    std::uint64_t seed = 0;
};

/// Throws InvalidSpec naming the offending field.
void validate(const SceneSpec& spec);

/// Square top-left (x, y) at every frame; the motion equation behind generate().
std::vector<std::pair<std::size_t, std::size_t>> square_trajectory(const SceneSpec& spec);

/// True for frames that belong to a moving segment (always false for Static/Flicker).
std::vector<bool> motion_frames(const SceneSpec& spec);

struct LabeledClip {
    PixelVideo video;
    int label = 0;
};

LabeledClip generate(const SceneSpec& spec);

struct EncoderConfig {
    std::size_t temporal_factor = 2;
    std::size_t spatial_factor = 4;
    std::size_t latent_channels = 4;
    std::size_t pixel_channels = 1;
};

void validate(const EncoderConfig& cfg);

/// Block-average pooling over f_t x f_s x f_s blocks into the first C latent
/// channels. Channels C..C_l-1 cycle through backward finite differences of
/// the pooled channels: temporal, horizontal, vertical (then repeat at 1/2, 1/3, ... gain).
LatentVideo pseudo_encode(const PixelVideo& x, const EncoderConfig& cfg);

/// Block replication of the first C latent channels, clamped to [0, 1].
PixelVideo pseudo_decode(const LatentVideo& z, const EncoderConfig& cfg);

}  // namespace ltd
