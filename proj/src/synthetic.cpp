#include "ltdlab/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ltdlab/error.hpp"
#include "ltdlab/rng.hpp"

namespace ltd {

std::string_view to_string(SceneKind kind) {
    switch (kind) {
        case SceneKind::Static: return "static";
        case SceneKind::MovingSquare: return "moving";
        case SceneKind::Flicker: return "flicker";
        case SceneKind::MixedSegments: return "mixed";
    }
    return "unknown";
}

SceneKind parse_scene_kind(std::string_view name) {
    if (name == "static") return SceneKind::Static;
    if (name == "moving") return SceneKind::MovingSquare;
    if (name == "flicker") return SceneKind::Flicker;
    if (name == "mixed") return SceneKind::MixedSegments;
    throw InvalidSpec("kind: unknown scene kind '" + std::string(name) + "'");
}

void validate(const SceneSpec& spec) {
    if (spec.frames < 1) throw InvalidSpec("frames: must be >= 1");
    if (spec.height < 1) throw InvalidSpec("height: must be >= 1");
    if (spec.width < 1) throw InvalidSpec("width: must be >= 1");
    if (spec.channels != 1 && spec.channels != 3) throw InvalidSpec("channels: must be 1 or 3");
    if (spec.square_size < 1 || spec.square_size > std::min(spec.height, spec.width)) {
        throw InvalidSpec("square_size: must fit inside the frame");
    }
    if (!std::isfinite(spec.velocity_x) || !std::isfinite(spec.velocity_y)) {
        throw InvalidSpec("velocity: must be finite");
    }
    if (spec.kind == SceneKind::Flicker) {
        if (!(spec.flicker_amplitude >= 0.0 && spec.flicker_amplitude <= 0.5)) {
            throw InvalidSpec("flicker_amplitude: must be in [0, 0.5]");
        }
        if (!(spec.flicker_period > 0.0) || !std::isfinite(spec.flicker_period)) {
            throw InvalidSpec("flicker_period: must be positive");
        }
    }
    if (spec.kind == SceneKind::MixedSegments) {
        if (spec.boundaries.empty()) throw InvalidSpec("boundaries: MixedSegments needs at least one boundary");
        for (std::size_t i = 0; i < spec.boundaries.size(); ++i) {
            if (spec.boundaries[i] >= spec.frames) throw InvalidSpec("boundaries: must lie in [0, frames)");
            if (i > 0 && spec.boundaries[i] <= spec.boundaries[i - 1]) {
                throw InvalidSpec("boundaries: must be strictly increasing");
            }
        }
    }
}

std::vector<bool> motion_frames(const SceneSpec& spec) {
    std::vector<bool> moving(spec.frames, false);
    if (spec.kind == SceneKind::MovingSquare) {
        std::fill(moving.begin(), moving.end(), true);
    } else if (spec.kind == SceneKind::MixedSegments) {
        for (std::size_t f = 0; f < spec.frames; ++f) {
            auto segment = static_cast<std::size_t>(
                std::upper_bound(spec.boundaries.begin(), spec.boundaries.end(), f) - spec.boundaries.begin());
            moving[f] = segment % 2 == 1;
        }
    }
    return moving;
}

namespace {

// Start coordinate that keeps the whole unclamped path inside [0, limit] when possible.
double draw_start(Rng& rng, double velocity, double steps, double limit) {
    double travel = velocity * steps;
    double lo = std::max(0.0, -travel);
    double hi = std::min(limit, limit - travel);
    if (hi < lo) return velocity >= 0.0 ? 0.0 : limit;
    return std::clamp(std::floor(lo + rng.uniform() * (hi - lo + 1.0)), lo, hi);
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> square_trajectory(const SceneSpec& spec) {
    validate(spec);
    auto moving = motion_frames(spec);
    double steps = 0.0;
    for (std::size_t f = 1; f < spec.frames; ++f) steps += moving[f] ? 1.0 : 0.0;

    Rng rng(spec.seed, 1);
    double limit_x = static_cast<double>(spec.width - spec.square_size);
    double limit_y = static_cast<double>(spec.height - spec.square_size);
    double x0 = spec.start_x ? *spec.start_x : draw_start(rng, spec.velocity_x, steps, limit_x);
    double y0 = spec.start_y ? *spec.start_y : draw_start(rng, spec.velocity_y, steps, limit_y);

    std::vector<std::pair<std::size_t, std::size_t>> path(spec.frames);
    double travelled = 0.0;
    for (std::size_t f = 0; f < spec.frames; ++f) {
        // Frame f advances only if the transition into it is part of a moving segment.
        if (f > 0 && moving[f]) travelled += 1.0;
        double x = std::clamp(std::round(x0 + spec.velocity_x * travelled), 0.0, limit_x);
        double y = std::clamp(std::round(y0 + spec.velocity_y * travelled), 0.0, limit_y);
        path[f] = {static_cast<std::size_t>(x), static_cast<std::size_t>(y)};
    }
    return path;
}

LabeledClip generate(const SceneSpec& spec) {
    validate(spec);
    auto path = square_trajectory(spec);
    Tensor t(Shape{spec.frames, spec.height, spec.width, spec.channels}, kBackground);

    for (std::size_t f = 0; f < spec.frames; ++f) {
        auto [x, y] = path[f];
        for (std::size_t h = y; h < y + spec.square_size; ++h)
            for (std::size_t w = x; w < x + spec.square_size; ++w)
                for (std::size_t c = 0; c < spec.channels; ++c) t.at(f, h, w, c) = kForeground;
    }

    if (spec.kind == SceneKind::Flicker) {
        // Squeeze the scene into [A, 1-A] so the uniform offset never clips.
        double amp = spec.flicker_amplitude;
        double phase = 2.0 * std::numbers::pi * Rng(spec.seed, 2).uniform();
        std::size_t frame_size = spec.height * spec.width * spec.channels;
        auto data = t.data();
        for (std::size_t f = 0; f < spec.frames; ++f) {
            double offset = amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(f) / spec.flicker_period + phase);
            for (std::size_t i = f * frame_size; i < (f + 1) * frame_size; ++i) {
                data[i] = std::clamp(amp + (1.0 - 2.0 * amp) * data[i] + offset, 0.0, 1.0);
            }
        }
    }
    return {PixelVideo(std::move(t)), static_cast<int>(spec.kind)};
}

void validate(const EncoderConfig& cfg) {
    if (cfg.temporal_factor < 1) throw InvalidConfig("encoder.temporal_factor: must be >= 1");
    if (cfg.spatial_factor < 1) throw InvalidConfig("encoder.spatial_factor: must be >= 1");
    if (cfg.pixel_channels != 1 && cfg.pixel_channels != 3) throw InvalidConfig("encoder.pixel_channels: must be 1 or 3");
    if (cfg.latent_channels < cfg.pixel_channels) {
        throw InvalidConfig("encoder.latent_channels: must be >= pixel channels");
    }
}

LatentVideo pseudo_encode(const PixelVideo& x, const EncoderConfig& cfg) {
    validate(cfg);
    const std::size_t ft = cfg.temporal_factor, fs = cfg.spatial_factor;
    const std::size_t C = x.channels(), Cl = cfg.latent_channels;
    if (C != cfg.pixel_channels) throw InvalidConfig("encoder.pixel_channels: does not match video channels");
    if (x.frames() % ft != 0) throw InvalidConfig("encoder.temporal_factor: does not divide frame count");
    if (x.height() % fs != 0 || x.width() % fs != 0) {
        throw InvalidConfig("encoder.spatial_factor: does not divide frame height/width");
    }
    const std::size_t Fl = x.frames() / ft, Hl = x.height() / fs, Wl = x.width() / fs;

    Tensor z(Shape{Fl, Hl, Wl, Cl});
    const double count = static_cast<double>(ft * fs * fs);
    for (std::size_t f = 0; f < Fl; ++f)
        for (std::size_t h = 0; h < Hl; ++h)
            for (std::size_t w = 0; w < Wl; ++w)
                for (std::size_t c = 0; c < C; ++c) {
                    // Accumulate offsets from the first sample so constant blocks pool exactly.
                    double first = x.tensor.at(f * ft, h * fs, w * fs, c);
                    double sum = 0.0;
                    for (std::size_t df = 0; df < ft; ++df)
                        for (std::size_t dh = 0; dh < fs; ++dh)
                            for (std::size_t dw = 0; dw < fs; ++dw)
                                sum += x.tensor.at(f * ft + df, h * fs + dh, w * fs + dw, c) - first;
                    z.at(f, h, w, c) = first + sum / count;
                }

    for (std::size_t k = C; k < Cl; ++k) {
        std::size_t j = k - C;
        std::size_t src = j % C;
        std::size_t filter = (j / C) % 3;
        double gain = 1.0 / static_cast<double>(1 + j / (3 * C));
        for (std::size_t f = 0; f < Fl; ++f)
            for (std::size_t h = 0; h < Hl; ++h)
                for (std::size_t w = 0; w < Wl; ++w) {
                    double cur = z.at(f, h, w, src);
                    double prev = cur;
                    if (filter == 0 && f > 0) prev = z.at(f - 1, h, w, src);
                    if (filter == 1 && w > 0) prev = z.at(f, h, w - 1, src);
                    if (filter == 2 && h > 0) prev = z.at(f, h - 1, w, src);
                    z.at(f, h, w, k) = gain * (cur - prev);
                }
    }
    return LatentVideo(std::move(z));
}

PixelVideo pseudo_decode(const LatentVideo& z, const EncoderConfig& cfg) {
    validate(cfg);
    const std::size_t C = cfg.pixel_channels;
    if (z.channels() != cfg.latent_channels) {
        throw InvalidShape("pseudo_decode: latent has " + std::to_string(z.channels()) +
                           " channels, config expects " + std::to_string(cfg.latent_channels));
    }
    const std::size_t ft = cfg.temporal_factor, fs = cfg.spatial_factor;
    Tensor x(Shape{z.frames() * ft, z.height() * fs, z.width() * fs, C});
    for (std::size_t f = 0; f < x.dim(0); ++f)
        for (std::size_t h = 0; h < x.dim(1); ++h)
            for (std::size_t w = 0; w < x.dim(2); ++w)
                for (std::size_t c = 0; c < C; ++c)
                    x.at(f, h, w, c) = std::clamp(z.tensor.at(f / ft, h / fs, w / fs, c), 0.0, 1.0);
    return PixelVideo(std::move(x));
}

}  // namespace ltd
