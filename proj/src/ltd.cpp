#include "ltdlab/ltd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>

#include "ltdlab/error.hpp"

namespace ltd {

ChannelNorm parse_channel_norm(std::string_view name) {
    if (name == "l2") return ChannelNorm::L2;
    if (name == "l1") return ChannelNorm::L1;
    throw InvalidConfig("ltd.norm: expected l2 or l1, got '" + std::string(name) + "'");
}

std::string_view to_string(ChannelNorm norm) {
    return norm == ChannelNorm::L2 ? "l2" : "l1";
}

void validate(const LtdConfig& cfg) {
    if (cfg.tau < 1) throw InvalidConfig("ltd.tau: must be >= 1");
}

DiscrepancyTensor::DiscrepancyTensor(Tensor t) : tensor(std::move(t)) {
    if (tensor.rank() != 3) throw InvalidShape("discrepancy tensor must be rank 3 (F,H,W), got " + tensor.shape().str());
}

std::pair<std::size_t, std::size_t> window_bounds(std::size_t f, std::size_t num_frames, std::size_t tau) {
    std::size_t half = tau / 2;
    std::size_t lo = f > half ? std::max<std::size_t>(1, f - half) : 1;
    std::size_t hi = std::min(num_frames, f + half);
    return {lo, hi};
}

namespace {

void require_latent(const LatentVideo& z, const LtdConfig& cfg) {
    validate(cfg);
    if (z.tensor.rank() != 4) throw InvalidShape("ltd_map: latent must be rank 4");
}

// Norm of z(next) - z(prev) at one spatial site, channels summed in order.
double pair_norm(const Tensor& z, std::size_t prev, std::size_t next, std::size_t h, std::size_t w,
                 ChannelNorm norm) {
    double acc = 0.0;
    for (std::size_t c = 0; c < z.dim(3); ++c) {
        double d = z.at(next, h, w, c) - z.at(prev, h, w, c);
        acc += norm == ChannelNorm::L2 ? d * d : std::abs(d);
    }
    return norm == ChannelNorm::L2 ? std::sqrt(acc) : acc;
}

}  // namespace

DiscrepancyTensor ltd_map(const LatentVideo& z, const LtdConfig& cfg) {
    require_latent(z, cfg);
    const std::size_t F = z.frames(), H = z.height(), W = z.width();
    const std::size_t sites = H * W;

    // step[p * sites + s] = norm between 0-based frames p and p+1.
    std::vector<double> step(F > 1 ? (F - 1) * sites : 0);
    for (std::size_t p = 0; p + 1 < F; ++p)
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t w = 0; w < W; ++w) step[p * sites + h * W + w] = pair_norm(z.tensor, p, p + 1, h, w, cfg.norm);

    Tensor d(Shape{F, H, W});
    for (std::size_t f = 1; f <= F; ++f) {
        auto [lo, hi] = window_bounds(f, F, cfg.tau);
        if (hi == lo) continue;
        const double span = static_cast<double>(hi - lo);
        for (std::size_t s = 0; s < sites; ++s) {
            double sum = 0.0;
            // 1-based pair i = (i, i+1) lives at 0-based row i - 1.
            for (std::size_t i = lo; i < hi; ++i) sum += step[(i - 1) * sites + s];
            d[(f - 1) * sites + s] = sum / span;
        }
    }
    return DiscrepancyTensor(std::move(d));
}

DiscrepancyTensor ltd_map_bruteforce(const LatentVideo& z, const LtdConfig& cfg) {
    require_latent(z, cfg);
    const std::size_t F = z.frames(), H = z.height(), W = z.width();
    Tensor d(Shape{F, H, W});
    for (std::size_t f = 1; f <= F; ++f) {
        std::size_t half = cfg.tau / 2;
        std::size_t lo = f > half ? f - half : 1;
        if (lo < 1) lo = 1;
        std::size_t hi = f + half < F ? f + half : F;
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t w = 0; w < W; ++w) {
                if (hi == lo) {
                    d.at(f - 1, h, w) = 0.0;
                    continue;
                }
                double sum = 0.0;
                for (std::size_t i = lo; i <= hi - 1; ++i) {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < z.channels(); ++c) {
                        double diff = z.tensor.at(i, h, w, c) - z.tensor.at(i - 1, h, w, c);
                        if (cfg.norm == ChannelNorm::L2) {
                            acc += diff * diff;
                        } else {
                            acc += std::abs(diff);
                        }
                    }
                    sum += cfg.norm == ChannelNorm::L2 ? std::sqrt(acc) : acc;
                }
                d.at(f - 1, h, w) = sum / static_cast<double>(hi - lo);
            }
        }
    }
    return DiscrepancyTensor(std::move(d));
}

WeightTensor weight_map(const DiscrepancyTensor& d) {
    Tensor w(d.tensor.shape());
    for (std::size_t i = 0; i < w.numel(); ++i) {
        double v = d.tensor[i];
        if (!(v >= 0.0)) throw InvalidInput("weight_map: negative discrepancy at element " + std::to_string(i));
        w[i] = std::log(std::numbers::e + v);
    }
    return WeightTensor{std::move(w)};
}

Tensor broadcast_weight(const Tensor& frames_map, std::size_t channels) {
    if (frames_map.rank() != 3) throw InvalidShape("broadcast_weight: expected rank-3 map");
    if (channels < 1) throw InvalidShape("broadcast_weight: channel count must be >= 1");
    Tensor out(Shape{frames_map.dim(0), frames_map.dim(1), frames_map.dim(2), channels});
    for (std::size_t i = 0; i < frames_map.numel(); ++i)
        for (std::size_t c = 0; c < channels; ++c) out[i * channels + c] = frames_map[i];
    return out;
}

std::vector<double> frame_means(const Tensor& frames_map) {
    if (frames_map.rank() != 3) throw InvalidShape("frame_means: expected rank-3 map");
    const std::size_t sites = frames_map.dim(1) * frames_map.dim(2);
    std::vector<double> means(frames_map.dim(0));
    for (std::size_t f = 0; f < means.size(); ++f) {
        double sum = 0.0;
        for (std::size_t s = 0; s < sites; ++s) sum += frames_map[f * sites + s];
        means[f] = sum / static_cast<double>(sites);
    }
    return means;
}

std::vector<FrameRange> write_heatmaps(const Tensor& frames_map, const std::filesystem::path& dir) {
    if (frames_map.rank() != 3) throw InvalidShape("write_heatmaps: expected rank-3 map");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create heatmap directory " + dir.string() + ": " + ec.message());

    const std::size_t H = frames_map.dim(1), W = frames_map.dim(2), sites = H * W;
    std::vector<FrameRange> ranges(frames_map.dim(0));
    std::ofstream sidecar(dir / "normalization.txt");
    if (!sidecar) throw IoError("cannot write " + (dir / "normalization.txt").string());
    sidecar << "# frame min max\n";

    for (std::size_t f = 0; f < ranges.size(); ++f) {
        auto first = frames_map.data().begin() + static_cast<std::ptrdiff_t>(f * sites);
        auto [mn, mx] = std::minmax_element(first, first + static_cast<std::ptrdiff_t>(sites));
        ranges[f] = {*mn, *mx};
        const double span = *mx - *mn;

        std::vector<unsigned char> pixels(sites, 0);
        if (span > 0.0) {
            for (std::size_t s = 0; s < sites; ++s) {
                double v = (frames_map[f * sites + s] - *mn) / span;
                pixels[s] = static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
            }
        }
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03zu.pgm", f);
        std::ofstream pgm(dir / name, std::ios::binary | std::ios::trunc);
        if (!pgm) throw IoError("cannot write " + (dir / name).string());
        pgm << "P5\n" << W << ' ' << H << "\n255\n";
        pgm.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));

        char line[96];
        std::snprintf(line, sizeof(line), "%zu %.17g %.17g\n", f, *mn, *mx);
        sidecar << line;
    }
    return ranges;
}

}  // namespace ltd
