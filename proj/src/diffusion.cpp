#include "ltdlab/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "ltdlab/error.hpp"

namespace ltd {

NoiseSchedule::NoiseSchedule(double beta_start, double beta_end, std::vector<double> betas)
    : beta_start_(beta_start), beta_end_(beta_end), betas_(std::move(betas)) {
    if (betas_.empty()) throw InvalidConfig("schedule: needs at least one step");
    alpha_bar_.resize(betas_.size());
    double prod = 1.0;
    for (std::size_t i = 0; i < betas_.size(); ++i) {
        if (!(betas_[i] > 0.0 && betas_[i] < 1.0)) throw InvalidConfig("schedule: beta must lie in (0,1)");
        if (i > 0 && betas_[i] < betas_[i - 1]) throw InvalidConfig("schedule: betas must be non-decreasing");
        prod *= 1.0 - betas_[i];
        alpha_bar_[i] = prod;
    }
    if (!(alpha_bar_.back() > 0.0)) throw NumericalError("schedule: alpha_bar underflows to zero");
}

NoiseSchedule make_linear_schedule(std::size_t steps, double beta_start, double beta_end) {
    if (steps < 1) throw InvalidConfig("schedule.steps: must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw InvalidConfig("schedule: need 0 < beta_start <= beta_end < 1");
    }
    std::vector<double> betas(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
        betas[i] = beta_start + (beta_end - beta_start) * frac;
    }
    return NoiseSchedule(beta_start, beta_end, std::move(betas));
}

Tensor q_sample(const Tensor& z0, std::size_t t, const Tensor& eps, const NoiseSchedule& sched) {
    require_same_shape(z0, eps, "q_sample");
    if (t < 1 || t > sched.steps()) throw InvalidInput("q_sample: timestep out of range");
    const double a = sched.alpha_bar(t);
    const double signal = std::sqrt(a), noise = std::sqrt(1.0 - a);
    Tensor out(z0.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = signal * z0[i] + noise * eps[i];
    return out;
}

double diffusion_loss(const Tensor& eps, const Tensor& eps_pred) {
    require_same_shape(eps, eps_pred, "diffusion_loss");
    double sum = 0.0;
    for (std::size_t i = 0; i < eps.numel(); ++i) {
        double r = eps[i] - eps_pred[i];
        sum += r * r;
    }
    return sum / static_cast<double>(eps.numel());
}

Tensor ltd_loss_weights(const DiscrepancyTensor& d, std::size_t channels) {
    Tensor w = broadcast_weight(weight_map(d), channels);
    for (auto& v : w.data()) v += 1.0;
    return w;
}

LtdLoss ltd_loss(const Tensor& eps, const Tensor& eps_pred, const DiscrepancyTensor& d) {
    require_same_shape(eps, eps_pred, "ltd_loss");
    if (eps.rank() != 4 || d.tensor.rank() != 3 || d.tensor.dim(0) != eps.dim(0) || d.tensor.dim(1) != eps.dim(1) ||
        d.tensor.dim(2) != eps.dim(2)) {
        throw InvalidShape("ltd_loss: D " + d.tensor.shape().str() + " does not match latent " + eps.shape().str());
    }
    Tensor w = ltd_loss_weights(d, eps.dim(3));
    double weighted = 0.0, plain = 0.0;
    for (std::size_t i = 0; i < eps.numel(); ++i) {
        double r = eps[i] - eps_pred[i];
        double e = r * r;
        weighted += w[i] * e;
        plain += e;
    }
    const double n = static_cast<double>(eps.numel());
    return {weighted / n, plain / n};
}

std::vector<std::size_t> ddim_timesteps(std::size_t num_steps, std::size_t total_steps) {
    if (num_steps < 1 || num_steps > total_steps) throw InvalidConfig("sampler.steps: must lie in [1, T]");
    std::vector<std::size_t> ts;
    ts.reserve(num_steps);
    for (std::size_t k = 0; k < num_steps; ++k) {
        double pos = num_steps == 1 ? static_cast<double>(total_steps)
                                    : 1.0 + static_cast<double>(k) * static_cast<double>(total_steps - 1) /
                                                static_cast<double>(num_steps - 1);
        ts.push_back(static_cast<std::size_t>(std::llround(pos)));
    }
    std::sort(ts.begin(), ts.end(), std::greater<>());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    if (ts.empty()) throw InvalidConfig("sampler: empty timestep subsequence");
    return ts;
}

Tensor guided_noise(const Tensor& eps_uncond, const Tensor& eps_cond, double scale) {
    require_same_shape(eps_uncond, eps_cond, "guided_noise");
    Tensor out(eps_uncond.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = eps_uncond[i] + scale * (eps_cond[i] - eps_uncond[i]);
    require_finite(out, "guided_noise");
    return out;
}

Tensor predict_clean(const Tensor& z_t, const Tensor& eps, double alpha_bar) {
    require_same_shape(z_t, eps, "predict_clean");
    const double signal = std::sqrt(alpha_bar), noise = std::sqrt(1.0 - alpha_bar);
    Tensor out(z_t.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = (z_t[i] - noise * eps[i]) / signal;
    require_finite(out, "predict_clean");
    return out;
}

Tensor ddim_step(const Tensor& z_t, const Tensor& eps, double alpha_bar, double alpha_bar_next, Tensor* clean_out) {
    Tensor clean = predict_clean(z_t, eps, alpha_bar);
    const double signal = std::sqrt(alpha_bar_next), noise = std::sqrt(1.0 - alpha_bar_next);
    Tensor out(z_t.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = signal * clean[i] + noise * eps[i];
    require_finite(out, "ddim_step");
    if (clean_out) *clean_out = std::move(clean);
    return out;
}

LatentVideo ddim_sample(const NoisePredictor& model, const Shape& shape, int cond, const SamplerConfig& cfg,
                        const NoiseSchedule& sched, Rng& rng, DdimTrace* trace) {
    if (cfg.guidance_scale < 0.0) throw InvalidConfig("sampler.guidance: must be >= 0");
    auto ts = ddim_timesteps(cfg.num_steps, sched.steps());
    Tensor z = sample_gaussian(rng, shape);
    if (trace) {
        trace->timesteps = ts;
        trace->clean_estimates.clear();
    }
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const std::size_t t = ts[k];
        Tensor eps_u = model.predict(z, t, cfg.null_class);
        Tensor eps_c = model.predict(z, t, cond);
        Tensor eps = guided_noise(eps_u, eps_c, cfg.guidance_scale);
        const double next = k + 1 < ts.size() ? sched.alpha_bar(ts[k + 1]) : 1.0;
        Tensor clean;
        z = ddim_step(z, eps, sched.alpha_bar(t), next, &clean);
        if (trace) trace->clean_estimates.push_back(std::move(clean));
    }
    return LatentVideo(std::move(z));
}

}  // namespace ltd
