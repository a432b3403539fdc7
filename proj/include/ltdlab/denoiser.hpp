#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ltdlab/diffusion.hpp"
#include "ltdlab/ltd.hpp"
#include "ltdlab/rng.hpp"
#include "ltdlab/video.hpp"

namespace ltd {

// Per-voxel conditioned MLP. Every latent voxel is an independent sample:
//   input  = [z_t channels | sinusoidal time embedding | class embedding]
//   hidden = tanh(W_k h + b_k), hidden_layers times
//   output = W_out h + b_out, one value per latent channel
// All voxels share weights; the time and class parts of the first layer are
// folded into a per-example bias.
struct DenoiserArch {
    std::size_t frames = 8;
    std::size_t height = 8;
    std::size_t width = 8;
    std::size_t channels = 4;
    std::size_t hidden_width = 64;
    std::size_t hidden_layers = 2;
    std::size_t time_dim = 16;
    std::size_t cond_dim = 8;
    std::size_t num_classes = kNumClasses;

    Shape latent_shape() const { return Shape{frames, height, width, channels}; }
    std::size_t input_dim() const { return channels + time_dim + cond_dim; }
};

void validate(const DenoiserArch& arch);

struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const { return rows * cols; }
};

/// Flat parameter vector plus the named blocks that tile it exactly.
/// Blocks: "layer{k}.weight"/"layer{k}.bias" (row-major out x in),
/// "out.weight"/"out.bias", and "cond.table" with num_classes + 1 rows.
struct DenoiserParams {
    std::vector<double> values;
    std::vector<ParamBlock> layout;

    const ParamBlock& block(std::string_view name) const;
    std::span<double> view(std::string_view name);
    std::span<const double> view(std::string_view name) const;
};

std::vector<ParamBlock> make_layout(const DenoiserArch& arch);

/// Weights ~ N(0, 1/fan_in), biases 0, class table ~ N(0, 0.02^2).
DenoiserParams init_params(const DenoiserArch& arch, Rng& rng);

std::vector<double> time_embedding(std::size_t t, std::size_t dim);

Tensor forward(const DenoiserArch& arch, const DenoiserParams& params, const Tensor& z_t, std::size_t t, int cond);

class Denoiser : public NoisePredictor {
public:
    Denoiser(DenoiserArch arch, DenoiserParams params);

    Tensor predict(const Tensor& z_t, std::size_t t, int cond) const override;

    const DenoiserArch& arch() const { return arch_; }
    const DenoiserParams& params() const { return params_; }

private:
    DenoiserArch arch_;
    DenoiserParams params_;
};

struct TrainExample {
    LatentVideo z0;
    DiscrepancyTensor d;
    std::size_t t = 1;
    Tensor eps;
    int cond = 0;
};

using TrainBatch = std::vector<TrainExample>;

/// Network input with an explicit per-element loss weight; the general form
/// both training objectives reduce to.
struct WeightedExample {
    Tensor z_t;
    std::size_t t = 1;
    int cond = 0;
    Tensor eps;
    Tensor weights;
};

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;
    double unweighted_loss = 0.0;
    /// Unweighted MSE per latent frame, averaged over the batch.
    std::vector<double> per_frame_loss;
};

/// Batch mean of mean(weights * (eps - forward(z_t))^2) and its exact
/// reverse-mode gradient. Weights are treated as constants.
LossAndGrad weighted_loss_and_grad(const DenoiserArch& arch, const DenoiserParams& params,
                                   std::span<const WeightedExample> batch);

/// The loss of weighted_loss_and_grad without the backward pass (bit-identical).
double weighted_loss(const DenoiserArch& arch, const DenoiserParams& params, std::span<const WeightedExample> batch);

/// Noises each z0 with q_sample and evaluates the LTD objective (weights
/// 1 + ln(e + D)) when use_ltd is set, the plain MSE otherwise.
LossAndGrad loss_and_grad(const DenoiserArch& arch, const DenoiserParams& params, const TrainBatch& batch,
                          const NoiseSchedule& sched, bool use_ltd);

std::vector<WeightedExample> prepare_batch(const TrainBatch& batch, const NoiseSchedule& sched, bool use_ltd);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;
};

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state, double lr,
               const AdamConfig& cfg = {});

/// Worst relative error between the analytic gradient and central
/// differences over num_coords coordinates drawn without replacement.
/// Denominator: max(|analytic|, |numeric|, 1e-12).
double finite_diff_check(const DenoiserArch& arch, const DenoiserParams& params, const TrainBatch& batch,
                         const NoiseSchedule& sched, bool use_ltd, std::size_t num_coords, double h,
                         std::uint64_t seed);

// Checkpoint = f64 .ltdt of the parameter vector + "<path>.txt" sidecar of
// "key = value" lines.
struct Checkpoint {
    DenoiserArch arch;
    DenoiserParams params;
    std::size_t timesteps = kDefaultTimesteps;
    double beta_start = kDefaultBetaStart;
    double beta_end = kDefaultBetaEnd;
    std::size_t train_step = 0;
    std::map<std::string, std::string> extra;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::filesystem::path checkpoint_sidecar(const std::filesystem::path& path);

}  // namespace ltd
