#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ltdlab/denoiser.hpp"
#include "ltdlab/diffusion.hpp"
#include "ltdlab/keyvalue.hpp"
#include "ltdlab/ltd.hpp"
#include "ltdlab/synthetic.hpp"

namespace ltd {

enum class LossMode { Baseline, Ltd, Both };

std::string_view to_string(LossMode mode);
LossMode parse_loss_mode(std::string_view name);

struct DataConfig {
    std::vector<SceneKind> kinds{SceneKind::MixedSegments};
    std::size_t clips_per_kind = 8;
    /// Geometry and kind parameters shared by every clip; kind and seed are set per clip.
    SceneSpec scene;
};

struct TrainConfig {
    double lr = 2e-5;
    std::size_t steps = 200;
    std::size_t batch_size = 4;
    double cond_dropout = 0.1;
    /// Write a checkpoint after every N updates (and before the first); 0 disables.
    std::size_t checkpoint_every = 0;
};

struct ExperimentConfig {
    DataConfig data;
    EncoderConfig encoder;
    LtdConfig ltd;
    std::size_t timesteps = kDefaultTimesteps;
    double beta_start = kDefaultBetaStart;
    double beta_end = kDefaultBetaEnd;
    DenoiserArch model;  // latent geometry is derived from data + encoder
    TrainConfig train;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "ltd_out";
    LossMode mode = LossMode::Both;
    std::size_t report_window = 50;

    NoiseSchedule schedule() const { return make_linear_schedule(timesteps, beta_start, beta_end); }
    Shape latent_shape() const;
};

/// Reads every recognised key, rejects unknown ones and validates the result.
/// LTD_SEED, when set in the environment, replaces the master seed.
ExperimentConfig parse_experiment_config(const KeyValues& kv);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
/// Inverse of parse_experiment_config (minus the environment override).
KeyValues to_key_values(const ExperimentConfig& cfg);
void validate(ExperimentConfig& cfg);

struct CorpusClip {
    SceneSpec spec;
    int label = 0;
    LatentVideo z0;
    DiscrepancyTensor d;  // cached: depends only on z0
};

/// Generates, encodes and computes D for every clip. Clip seeds derive from the master seed.
std::vector<CorpusClip> build_corpus(const ExperimentConfig& cfg);
std::vector<SceneSpec> corpus_specs(const ExperimentConfig& cfg);

/// gen-data: one pixel-space .ltdt per clip plus manifest.tsv
/// ("file\tkind\tlabel\tseed" per line).
void write_dataset(const ExperimentConfig& cfg, const std::filesystem::path& dir);

/// Every random quantity consumed by one training step. A pure function of
/// (master seed, step), so paired runs see identical batches.
struct StepDraws {
    std::vector<std::size_t> clip;
    std::vector<std::size_t> t;
    std::vector<int> cond;
    std::vector<Tensor> eps;
    std::uint64_t digest = 0;
};

StepDraws draw_step(const ExperimentConfig& cfg, std::size_t corpus_size, std::size_t step);
TrainBatch make_batch(const std::vector<CorpusClip>& corpus, const StepDraws& draws);

struct RunRecord {
    std::size_t step = 0;
    LossMode mode = LossMode::Baseline;
    double total_loss = 0.0;
    double unweighted_loss = 0.0;
    double mean_ltd = 0.0;
    std::uint64_t draw_digest = 0;
    std::vector<double> frame_loss;
    std::vector<double> frame_ltd;
};

struct RunLog {
    std::vector<RunRecord> records;

    std::vector<const RunRecord*> mode_records(LossMode mode) const;
    bool has_mode(LossMode mode) const;
};

/// CSV: step,mode,total_loss,unweighted_loss,mean_ltd,draw_digest,
/// frame_loss_0..F-1,frame_ltd_0..F-1; doubles printed with %.17g.
void write_run_log(const RunLog& log, const std::filesystem::path& path);
RunLog read_run_log(const std::filesystem::path& path);

/// Parameters of one mode's run, after initialisation with the shared seed.
DenoiserParams initial_params(const ExperimentConfig& cfg);

/// Trains one mode over the shared draws. Step s (1-based) is logged with the
/// parameters after s - 1 updates. With a checkpoint_dir, writes the final
/// checkpoint and, if train.checkpoint_every is set, periodic ones.
RunLog train_mode(const ExperimentConfig& cfg, const std::vector<CorpusClip>& corpus, LossMode mode,
                  DenoiserParams* final_params = nullptr, const std::filesystem::path* checkpoint_dir = nullptr);

Checkpoint make_checkpoint(const ExperimentConfig& cfg, LossMode mode, const DenoiserParams& params,
                           std::size_t updates);

/// Validates cfg, creates output_dir, trains the requested mode(s), writes
/// run_log.csv, config.txt and checkpoint_<mode>.ltdt (+ periodic ones).
RunLog run_training(ExperimentConfig cfg);

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, LossMode mode,
                                      std::optional<std::size_t> step = std::nullopt);

struct FrameProfileRow {
    std::size_t frame = 0;
    double mean_ltd = 0.0;
    std::optional<double> baseline_loss;
    std::optional<double> ltd_loss;
};

struct FrameProfile {
    std::vector<FrameProfileRow> rows;
    std::optional<double> ltd_peak_to_mean;
    std::optional<double> baseline_peak_to_mean;
    std::optional<double> ltd_run_peak_to_mean;
    std::optional<double> correlation;  // Pearson(mean_ltd, baseline_loss)
};

/// Averages per-frame columns over the last `window` steps of each mode.
FrameProfile frame_profile(const RunLog& log, std::size_t window);
/// Writes frames.csv (frame_index,mean_ltd,baseline_loss,ltd_loss) and
/// frames_summary.txt; undefined quantities are written as "n/a".
FrameProfile report_frame_profile(const RunLog& log, std::size_t window, const std::filesystem::path& out);

/// PGM renderings of ln(e + D) for one latent, via write_heatmaps.
std::vector<FrameRange> report_heatmaps(const LatentVideo& latent, const LtdConfig& cfg,
                                        const std::filesystem::path& out);

struct PeakEntry {
    double baseline_ratio = 0.0;
    double ltd_ratio = 0.0;
    double reduction() const { return baseline_ratio - ltd_ratio; }
};

struct PeakReport {
    std::vector<PeakEntry> per_seed;
    double mean_baseline_ratio = 0.0;
    double mean_ltd_ratio = 0.0;
    double mean_reduction = 0.0;
    std::size_t seeds_reduced = 0;
};

/// max / mean of a per-frame curve; nullopt when the mean is not positive.
std::optional<double> peak_to_mean(const std::vector<double>& curve);
std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b);

/// Peak-to-mean ratio of the final-window per-frame unweighted loss for each
/// mode of each paired log. Throws InvalidInput when a log lacks a mode.
PeakReport compare_peaks(const std::vector<RunLog>& logs, std::size_t window);
void write_peak_report(const PeakReport& report, const std::filesystem::path& out);

}  // namespace ltd
