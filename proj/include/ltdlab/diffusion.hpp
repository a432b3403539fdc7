#pragma once

#include <cstddef>
#include <vector>

#include "ltdlab/ltd.hpp"
#include "ltdlab/rng.hpp"
#include "ltdlab/video.hpp"

namespace ltd {

/// Timesteps are 1-based: beta(t) and alpha_bar(t) for t in [1, T].
class NoiseSchedule {
public:
    NoiseSchedule(double beta_start, double beta_end, std::vector<double> betas);

    std::size_t steps() const { return betas_.size(); }
    double beta(std::size_t t) const { return betas_.at(t - 1); }
    double alpha_bar(std::size_t t) const { return alpha_bar_.at(t - 1); }
    double beta_start() const { return beta_start_; }
    double beta_end() const { return beta_end_; }
    const std::vector<double>& betas() const { return betas_; }
    const std::vector<double>& alpha_bars() const { return alpha_bar_; }

private:
    double beta_start_;
    double beta_end_;
    std::vector<double> betas_;
    std::vector<double> alpha_bar_;
};

inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.02;
inline constexpr std::size_t kDefaultTimesteps = 1000;

NoiseSchedule make_linear_schedule(std::size_t steps = kDefaultTimesteps, double beta_start = kDefaultBetaStart,
                                   double beta_end = kDefaultBetaEnd);

/// z_t = sqrt(alpha_bar_t) z_0 + sqrt(1 - alpha_bar_t) eps
Tensor q_sample(const Tensor& z0, std::size_t t, const Tensor& eps, const NoiseSchedule& sched);

/// Mean of (eps - eps_pred)^2 over every element.
double diffusion_loss(const Tensor& eps, const Tensor& eps_pred);

struct LtdLoss {
    double total = 0.0;
    double unweighted = 0.0;
};

/// total = mean((1 + ln(e + D)) * (eps - eps_pred)^2) with D broadcast over
/// channels; unweighted is the plain diffusion_loss of the same pair.
LtdLoss ltd_loss(const Tensor& eps, const Tensor& eps_pred, const DiscrepancyTensor& d);

/// Per-element loss weights 1 + ln(e + D), shaped like the latent.
Tensor ltd_loss_weights(const DiscrepancyTensor& d, std::size_t channels);

/// Noise predictor eps(z_t, t, c). Implemented by the denoiser and by test oracles.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual Tensor predict(const Tensor& z_t, std::size_t t, int cond) const = 0;
};

struct SamplerConfig {
    std::size_t num_steps = 50;
    double guidance_scale = 7.5;
    int null_class = kNullClass;
};

/// Evenly spaced over [1, T], rounded, deduplicated, descending.
std::vector<std::size_t> ddim_timesteps(std::size_t num_steps, std::size_t total_steps);

/// eps_u + s (eps_c - eps_u)
Tensor guided_noise(const Tensor& eps_uncond, const Tensor& eps_cond, double scale);

/// z0_hat = (z_t - sqrt(1 - a) eps) / sqrt(a)
Tensor predict_clean(const Tensor& z_t, const Tensor& eps, double alpha_bar);

/// One eta = 0 update from alpha_bar to alpha_bar_next (1.0 for the final step).
/// Returns the next latent; clean_out receives z0_hat when non-null.
Tensor ddim_step(const Tensor& z_t, const Tensor& eps, double alpha_bar, double alpha_bar_next,
                 Tensor* clean_out = nullptr);

struct DdimTrace {
    std::vector<std::size_t> timesteps;
    std::vector<Tensor> clean_estimates;
};

/// Deterministic DDIM from z_T ~ N(0, I) (drawn from rng) down to z_0 with
/// classifier-free guidance. Fills trace when non-null.
LatentVideo ddim_sample(const NoisePredictor& model, const Shape& shape, int cond, const SamplerConfig& cfg,
                        const NoiseSchedule& sched, Rng& rng, DdimTrace* trace = nullptr);

}  // namespace ltd
