// ltdlab: command-line front end for data generation, LTD maps, training,
// sampling and reports.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 I/O or file-format
// error, 4 numerical failure.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ltdlab/denoiser.hpp"
#include "ltdlab/diffusion.hpp"
#include "ltdlab/error.hpp"
#include "ltdlab/harness.hpp"
#include "ltdlab/ltd.hpp"
#include "ltdlab/synthetic.hpp"
#include "ltdlab/tensor_io.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

ltd::EncoderConfig encoder_from(const ltd::Checkpoint& ckpt) {
    auto get = [&](const std::string& key, std::size_t fallback) {
        auto it = ckpt.extra.find(key);
        return it == ckpt.extra.end() ? fallback : static_cast<std::size_t>(std::stoull(it->second));
    };
    ltd::EncoderConfig enc;
    enc.temporal_factor = get("encoder.temporal_factor", enc.temporal_factor);
    enc.spatial_factor = get("encoder.spatial_factor", enc.spatial_factor);
    enc.latent_channels = get("encoder.latent_channels", ckpt.arch.channels);
    enc.pixel_channels = get("encoder.pixel_channels", enc.pixel_channels);
    return enc;
}

int run(int argc, char** argv) {
    CLI::App app{"Latent temporal discrepancy diffusion lab"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic pixel-video corpus");
    std::string gen_config, gen_out;
    gen->add_option("--config", gen_config, "Experiment config file")->required();
    gen->add_option("--out", gen_out, "Output directory")->required();

    // encode
    auto* enc = app.add_subcommand("encode", "Pseudo-encode a pixel video into a latent");
    std::string enc_in, enc_out;
    std::size_t enc_ft = 2, enc_fs = 4, enc_cl = 4;
    enc->add_option("--in", enc_in, "Pixel video .ltdt")->required();
    enc->add_option("--out", enc_out, "Latent .ltdt")->required();
    enc->add_option("--temporal-factor", enc_ft, "Temporal pooling factor");
    enc->add_option("--spatial-factor", enc_fs, "Spatial pooling factor");
    enc->add_option("--latent-channels", enc_cl, "Latent channel count");

    // ltd-map
    auto* map = app.add_subcommand("ltd-map", "Compute the latent temporal discrepancy of a latent");
    std::string map_in, map_out, map_weights, map_heatmap, map_norm = "l2";
    std::size_t map_tau = 3;
    map->add_option("--in", map_in, "Latent .ltdt (F,H,W,C)")->required();
    map->add_option("--tau", map_tau, "Sliding window size");
    map->add_option("--norm", map_norm, "Channel norm: l2 or l1");
    map->add_option("--out", map_out, "Discrepancy .ltdt (F,H,W)")->required();
    map->add_option("--weights", map_weights, "Also write ln(e+D) here");
    map->add_option("--heatmap", map_heatmap, "Also write per-frame PGMs of ln(e+D) here");

    // train
    auto* train = app.add_subcommand("train", "Train baseline and/or LTD-weighted denoisers");
    std::string train_config, train_mode, train_out;
    train->add_option("--config", train_config, "Experiment config file")->required();
    train->add_option("--mode", train_mode, "baseline, ltd or both (overrides config)");
    train->add_option("--out", train_out, "Output directory (overrides config)");

    // sample
    auto* sample = app.add_subcommand("sample", "DDIM sampling from a checkpoint");
    std::string sample_ckpt, sample_out, sample_decode;
    int sample_class = 0;
    std::size_t sample_steps = 50;
    double sample_guidance = 7.5;
    std::uint64_t sample_seed = 0;
    sample->add_option("--checkpoint", sample_ckpt, "Checkpoint .ltdt")->required();
    sample->add_option("--class", sample_class, "Class label")->required();
    sample->add_option("--steps", sample_steps, "DDIM steps");
    sample->add_option("--guidance", sample_guidance, "Classifier-free guidance scale");
    sample->add_option("--seed", sample_seed, "Sampling seed");
    sample->add_option("--out", sample_out, "Latent output .ltdt")->required();
    sample->add_option("--decode", sample_decode, "Also write the pseudo-decoded video here");

    // report
    auto* report = app.add_subcommand("report", "Diagnostics from run logs and latents");
    report->require_subcommand(1);
    auto* frames = report->add_subcommand("frames", "Per-frame LTD and loss profile");
    std::string frames_log, frames_out;
    std::size_t frames_window = 50;
    frames->add_option("--log", frames_log, "run_log.csv")->required();
    frames->add_option("--window", frames_window, "Trailing window of steps");
    frames->add_option("--out", frames_out, "Output directory")->required();

    auto* heat = report->add_subcommand("heatmaps", "PGM heatmaps of ln(e+D)");
    std::string heat_in, heat_out, heat_norm = "l2";
    std::size_t heat_tau = 3;
    heat->add_option("--in", heat_in, "Latent .ltdt")->required();
    heat->add_option("--tau", heat_tau, "Sliding window size");
    heat->add_option("--norm", heat_norm, "Channel norm: l2 or l1");
    heat->add_option("--out", heat_out, "Output directory")->required();

    auto* peaks = report->add_subcommand("peaks", "Peak-to-mean comparison of paired runs");
    std::vector<std::string> peak_logs;
    std::string peak_out;
    std::size_t peak_window = 50;
    peaks->add_option("--log", peak_logs, "run_log.csv of a paired run (repeatable)")->required();
    peaks->add_option("--window", peak_window, "Trailing window of steps");
    peaks->add_option("--out", peak_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    if (*gen) {
        auto cfg = ltd::load_experiment_config(gen_config);
        ltd::write_dataset(cfg, gen_out);
    } else if (*enc) {
        ltd::PixelVideo video(ltd::load_tensor(enc_in));
        ltd::EncoderConfig cfg{enc_ft, enc_fs, enc_cl, video.channels()};
        ltd::save_tensor(ltd::pseudo_encode(video, cfg).tensor, enc_out);
    } else if (*map) {
        ltd::LatentVideo z(ltd::load_tensor(map_in));
        ltd::LtdConfig cfg{map_tau, ltd::parse_channel_norm(map_norm)};
        auto d = ltd::ltd_map(z, cfg);
        ltd::save_tensor(d.tensor, map_out);
        auto w = ltd::weight_map(d);
        if (!map_weights.empty()) ltd::save_tensor(w.tensor, map_weights);
        if (!map_heatmap.empty()) ltd::write_heatmaps(w.tensor, map_heatmap);
    } else if (*train) {
        auto kv = ltd::KeyValues::load(train_config);
        if (!train_mode.empty()) kv.set("mode", train_mode);
        if (!train_out.empty()) kv.set("output_dir", train_out);
        auto cfg = ltd::parse_experiment_config(kv);
        auto log = ltd::run_training(cfg);
        auto profile = ltd::report_frame_profile(log, cfg.report_window, cfg.output_dir);
        std::printf("trained %zu step(s) per mode; log: %s\n", cfg.train.steps,
                    (cfg.output_dir / "run_log.csv").string().c_str());
        if (profile.correlation) std::printf("pearson(mean_ltd, baseline_loss) = %.6f\n", *profile.correlation);
    } else if (*sample) {
        auto ckpt = ltd::load_checkpoint(sample_ckpt);
        ltd::Denoiser model(ckpt.arch, ckpt.params);
        auto sched = ltd::make_linear_schedule(ckpt.timesteps, ckpt.beta_start, ckpt.beta_end);
        if (sample_class < 0 || sample_class > static_cast<int>(ckpt.arch.num_classes)) {
            throw ltd::InvalidConfig("--class: label out of range");
        }
        ltd::SamplerConfig cfg{sample_steps, sample_guidance, static_cast<int>(ckpt.arch.num_classes)};
        ltd::Rng rng(sample_seed, 0x5A);
        auto z = ltd::ddim_sample(model, ckpt.arch.latent_shape(), sample_class, cfg, sched, rng);
        ltd::save_tensor(z.tensor, sample_out);
        if (!sample_decode.empty()) ltd::save_tensor(ltd::pseudo_decode(z, encoder_from(ckpt)).tensor, sample_decode);
    } else if (*frames) {
        auto profile = ltd::report_frame_profile(ltd::read_run_log(frames_log), frames_window, frames_out);
        std::printf("frames: %zu, pearson(mean_ltd, baseline_loss) = %s\n", profile.rows.size(),
                    profile.correlation ? ltd::format_double(*profile.correlation).c_str() : "n/a");
    } else if (*heat) {
        ltd::LatentVideo z(ltd::load_tensor(heat_in));
        ltd::report_heatmaps(z, {heat_tau, ltd::parse_channel_norm(heat_norm)}, heat_out);
    } else if (*peaks) {
        std::vector<ltd::RunLog> logs;
        for (const auto& p : peak_logs) logs.push_back(ltd::read_run_log(p));
        auto rep = ltd::compare_peaks(logs, peak_window);
        ltd::write_peak_report(rep, peak_out);
        std::printf("peak-to-mean: baseline %.6f, ltd %.6f, reduced in %zu of %zu run(s)\n", rep.mean_baseline_ratio,
                    rep.mean_ltd_ratio, rep.seeds_reduced, rep.per_seed.size());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ltd::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const ltd::IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const ltd::FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return kExitIo;
    } catch (const ltd::Error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
}
