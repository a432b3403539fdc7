#include "ltdlab/denoiser.hpp"

#include <Eigen/Dense>
#include <fstream>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "ltdlab/error.hpp"
#include "ltdlab/keyvalue.hpp"
#include "ltdlab/tensor_io.hpp"

namespace ltd {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
using Vec = Eigen::VectorXd;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;
using ConstVecMap = Eigen::Map<const Vec>;
using VecMap = Eigen::Map<Vec>;

std::string layer_name(std::size_t k, const char* part) {
    return "layer" + std::to_string(k) + "." + part;
}

ConstRowMap matrix(const DenoiserParams& p, const ParamBlock& b) {
    return ConstRowMap(p.values.data() + b.offset, static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols));
}

RowMap matrix(std::vector<double>& v, const ParamBlock& b) {
    return RowMap(v.data() + b.offset, static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols));
}

void check_input(const DenoiserArch& arch, const Tensor& z_t, int cond) {
    if (z_t.shape() != arch.latent_shape()) {
        throw InvalidShape("denoiser: input " + z_t.shape().str() + " does not match geometry " +
                           arch.latent_shape().str());
    }
    if (cond < 0 || static_cast<std::size_t>(cond) > arch.num_classes) {
        throw InvalidInput("denoiser: class label " + std::to_string(cond) + " out of range");
    }
}

// Cached activations of one forward pass: hidden[k] is tanh of layer k.
struct Activations {
    std::vector<ColMat> hidden;
    ColMat out;
    Vec temb;
};

Activations run_forward(const DenoiserArch& arch, const DenoiserParams& p, const Tensor& z_t, std::size_t t,
                        int cond) {
    const auto C = static_cast<Eigen::Index>(arch.channels);
    const auto N = static_cast<Eigen::Index>(z_t.numel() / arch.channels);
    const auto Dt = static_cast<Eigen::Index>(arch.time_dim);
    const auto Dc = static_cast<Eigen::Index>(arch.cond_dim);

    Activations act;
    auto temb = time_embedding(t, arch.time_dim);
    act.temb = ConstVecMap(temb.data(), Dt);

    // Row-major (F,H,W,C) storage is a column-major C x N matrix.
    Eigen::Map<const ColMat> z(z_t.data().data(), C, N);

    auto w0 = matrix(p, p.block("layer0.weight"));
    auto b0 = matrix(p, p.block("layer0.bias"));
    auto table = matrix(p, p.block("cond.table"));
    Vec shared = w0.middleCols(C, Dt) * act.temb + w0.rightCols(Dc) * table.row(cond).transpose() +
                 b0.transpose();

    ColMat a = w0.leftCols(C) * z;
    a.colwise() += shared;
    act.hidden.push_back(a.array().tanh().matrix());

    for (std::size_t k = 1; k < arch.hidden_layers; ++k) {
        auto w = matrix(p, p.block(layer_name(k, "weight")));
        auto b = matrix(p, p.block(layer_name(k, "bias")));
        ColMat ak = w * act.hidden.back();
        ak.colwise() += b.transpose().col(0);
        act.hidden.push_back(ak.array().tanh().matrix());
    }
    auto wo = matrix(p, p.block("out.weight"));
    auto bo = matrix(p, p.block("out.bias"));
    act.out = wo * act.hidden.back();
    act.out.colwise() += bo.transpose().col(0);
    return act;
}

// Neumaier-compensated running sum; keeps the loss accurate enough that
// central differences at h = 1e-5 resolve gradients of order 1e-7.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double v) {
        double t = sum + v;
        carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + carry; }
};

struct ErrorSums {
    double weighted = 0.0;
    double plain = 0.0;
};

ColMat residual(const WeightedExample& ex, const Activations& act, Eigen::Index C, Eigen::Index N) {
    Eigen::Map<const ColMat> eps(ex.eps.data().data(), C, N);
    return eps - act.out;
}

// Fixed element order for every reduction.
ErrorSums reduce_errors(const ColMat& resid, const Tensor& weights, std::size_t frame_elems,
                        std::vector<double>* per_frame) {
    CompensatedSum weighted, plain;
    for (Eigen::Index i = 0; i < resid.size(); ++i) {
        double r = resid.data()[i];
        double e = r * r;
        weighted.add(weights[static_cast<std::size_t>(i)] * e);
        plain.add(e);
        if (per_frame) (*per_frame)[static_cast<std::size_t>(i) / frame_elems] += e;
    }
    return {weighted.value(), plain.value()};
}

}  // namespace

void validate(const DenoiserArch& arch) {
    if (arch.frames < 1 || arch.height < 1 || arch.width < 1 || arch.channels < 1) {
        throw InvalidConfig("model: latent geometry must be positive");
    }
    if (arch.hidden_width < 1) throw InvalidConfig("model.hidden_width: must be >= 1");
    if (arch.hidden_layers < 1) throw InvalidConfig("model.hidden_layers: must be >= 1");
    if (arch.time_dim < 2 || arch.time_dim % 2 != 0) throw InvalidConfig("model.time_dim: must be even and >= 2");
    if (arch.cond_dim < 1) throw InvalidConfig("model.cond_dim: must be >= 1");
    if (arch.num_classes < 1) throw InvalidConfig("model.num_classes: must be >= 1");
}

const ParamBlock& DenoiserParams::block(std::string_view name) const {
    for (const auto& b : layout) {
        if (b.name == name) return b;
    }
    throw InvalidInput("denoiser params: no block named '" + std::string(name) + "'");
}

std::span<double> DenoiserParams::view(std::string_view name) {
    const auto& b = block(name);
    return std::span<double>(values).subspan(b.offset, b.size());
}

std::span<const double> DenoiserParams::view(std::string_view name) const {
    const auto& b = block(name);
    return std::span<const double>(values).subspan(b.offset, b.size());
}

std::vector<ParamBlock> make_layout(const DenoiserArch& arch) {
    validate(arch);
    std::vector<ParamBlock> layout;
    std::size_t offset = 0;
    auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
        layout.push_back({std::move(name), offset, rows, cols});
        offset += rows * cols;
    };
    std::size_t in = arch.input_dim();
    for (std::size_t k = 0; k < arch.hidden_layers; ++k) {
        add(layer_name(k, "weight"), arch.hidden_width, in);
        add(layer_name(k, "bias"), 1, arch.hidden_width);
        in = arch.hidden_width;
    }
    add("out.weight", arch.channels, arch.hidden_width);
    add("out.bias", 1, arch.channels);
    add("cond.table", arch.num_classes + 1, arch.cond_dim);
    return layout;
}

DenoiserParams init_params(const DenoiserArch& arch, Rng& rng) {
    DenoiserParams p;
    p.layout = make_layout(arch);
    const auto& last = p.layout.back();
    p.values.assign(last.offset + last.size(), 0.0);
    for (const auto& b : p.layout) {
        double stddev = 0.0;
        if (b.name.ends_with(".weight")) {
            stddev = 1.0 / std::sqrt(static_cast<double>(b.cols));
        } else if (b.name == "cond.table") {
            stddev = 0.02;
        }
        if (stddev == 0.0) continue;
        for (std::size_t i = 0; i < b.size(); ++i) p.values[b.offset + i] = stddev * rng.gaussian();
    }
    return p;
}

std::vector<double> time_embedding(std::size_t t, std::size_t dim) {
    const std::size_t half = dim / 2;
    std::vector<double> emb(dim);
    for (std::size_t i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
        double arg = static_cast<double>(t) * freq;
        emb[i] = std::sin(arg);
        emb[i + half] = std::cos(arg);
    }
    return emb;
}

Tensor forward(const DenoiserArch& arch, const DenoiserParams& params, const Tensor& z_t, std::size_t t, int cond) {
    check_input(arch, z_t, cond);
    auto act = run_forward(arch, params, z_t, t, cond);
    std::vector<double> data(act.out.data(), act.out.data() + act.out.size());
    Tensor out(z_t.shape(), std::move(data));
    return out;
}

Denoiser::Denoiser(DenoiserArch arch, DenoiserParams params) : arch_(arch), params_(std::move(params)) {
    auto expected = make_layout(arch_);
    const auto& last = expected.back();
    if (params_.values.size() != last.offset + last.size()) {
        throw InvalidShape("denoiser: parameter vector does not match architecture");
    }
    params_.layout = std::move(expected);
}

Tensor Denoiser::predict(const Tensor& z_t, std::size_t t, int cond) const {
    return forward(arch_, params_, z_t, t, cond);
}

double weighted_loss(const DenoiserArch& arch, const DenoiserParams& p, std::span<const WeightedExample> batch) {
    if (batch.empty()) throw InvalidInput("loss_and_grad: empty batch");
    const auto C = static_cast<Eigen::Index>(arch.channels);
    const std::size_t frame_elems = arch.height * arch.width * arch.channels;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& ex : batch) {
        check_input(arch, ex.z_t, ex.cond);
        require_same_shape(ex.z_t, ex.eps, "loss_and_grad eps");
        require_same_shape(ex.z_t, ex.weights, "loss_and_grad weights");
        const auto N = static_cast<Eigen::Index>(ex.z_t.numel() / arch.channels);
        const double inv_n = 1.0 / static_cast<double>(ex.z_t.numel());
        auto act = run_forward(arch, p, ex.z_t, ex.t, ex.cond);
        loss += reduce_errors(residual(ex, act, C, N), ex.weights, frame_elems, nullptr).weighted * inv_n * inv_batch;
    }
    if (!std::isfinite(loss)) throw NumericalError("loss_and_grad: non-finite loss");
    return loss;
}

LossAndGrad weighted_loss_and_grad(const DenoiserArch& arch, const DenoiserParams& p,
                                   std::span<const WeightedExample> batch) {
    if (batch.empty()) throw InvalidInput("loss_and_grad: empty batch");
    const auto C = static_cast<Eigen::Index>(arch.channels);
    const auto Dt = static_cast<Eigen::Index>(arch.time_dim);
    const auto Dc = static_cast<Eigen::Index>(arch.cond_dim);
    const std::size_t frame_elems = arch.height * arch.width * arch.channels;

    LossAndGrad result;
    result.grad.assign(p.values.size(), 0.0);
    result.per_frame_loss.assign(arch.frames, 0.0);
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    for (const auto& ex : batch) {
        check_input(arch, ex.z_t, ex.cond);
        require_same_shape(ex.z_t, ex.eps, "loss_and_grad eps");
        require_same_shape(ex.z_t, ex.weights, "loss_and_grad weights");
        const auto N = static_cast<Eigen::Index>(ex.z_t.numel() / arch.channels);
        const double inv_n = 1.0 / static_cast<double>(ex.z_t.numel());

        auto act = run_forward(arch, p, ex.z_t, ex.t, ex.cond);
        Eigen::Map<const ColMat> w(ex.weights.data().data(), C, N);
        ColMat resid = residual(ex, act, C, N);
        auto sums = reduce_errors(resid, ex.weights, frame_elems, &result.per_frame_loss);
        result.loss += sums.weighted * inv_n * inv_batch;
        result.unweighted_loss += sums.plain * inv_n * inv_batch;

        ColMat delta = (-2.0 * inv_n * inv_batch) * w.cwiseProduct(resid);

        auto gwo = matrix(result.grad, p.block("out.weight"));
        auto gbo = matrix(result.grad, p.block("out.bias"));
        gwo += delta * act.hidden.back().transpose();
        gbo += delta.rowwise().sum().transpose();
        ColMat back = matrix(p, p.block("out.weight")).transpose() * delta;

        for (std::size_t k = arch.hidden_layers; k-- > 0;) {
            // d tanh = 1 - h^2
            ColMat da = back.cwiseProduct((1.0 - act.hidden[k].array().square()).matrix());
            auto gb = matrix(result.grad, p.block(layer_name(k, "bias")));
            Vec da_sum = da.rowwise().sum();
            gb += da_sum.transpose();
            auto gw = matrix(result.grad, p.block(layer_name(k, "weight")));
            if (k > 0) {
                gw += da * act.hidden[k - 1].transpose();
                back = matrix(p, p.block(layer_name(k, "weight"))).transpose() * da;
            } else {
                Eigen::Map<const ColMat> z(ex.z_t.data().data(), C, N);
                auto w0 = matrix(p, p.block("layer0.weight"));
                auto table = matrix(p, p.block("cond.table"));
                gw.leftCols(C) += da * z.transpose();
                gw.middleCols(C, Dt) += da_sum * act.temb.transpose();
                gw.rightCols(Dc) += da_sum * table.row(ex.cond);
                auto gtable = matrix(result.grad, p.block("cond.table"));
                gtable.row(ex.cond) += (w0.rightCols(Dc).transpose() * da_sum).transpose();
            }
        }
    }
    const double per_frame_norm = 1.0 / (static_cast<double>(frame_elems) * static_cast<double>(batch.size()));
    for (auto& v : result.per_frame_loss) v *= per_frame_norm;

    if (!std::isfinite(result.loss) || !std::isfinite(result.unweighted_loss)) {
        throw NumericalError("loss_and_grad: non-finite loss");
    }
    return result;
}

std::vector<WeightedExample> prepare_batch(const TrainBatch& batch, const NoiseSchedule& sched, bool use_ltd) {
    std::vector<WeightedExample> prepared;
    prepared.reserve(batch.size());
    for (const auto& ex : batch) {
        WeightedExample w;
        w.z_t = q_sample(ex.z0.tensor, ex.t, ex.eps, sched);
        w.t = ex.t;
        w.cond = ex.cond;
        w.eps = ex.eps;
        w.weights = use_ltd ? ltd_loss_weights(ex.d, ex.z0.channels()) : Tensor(ex.z0.tensor.shape(), 1.0);
        prepared.push_back(std::move(w));
    }
    return prepared;
}

LossAndGrad loss_and_grad(const DenoiserArch& arch, const DenoiserParams& params, const TrainBatch& batch,
                          const NoiseSchedule& sched, bool use_ltd) {
    auto prepared = prepare_batch(batch, sched, use_ltd);
    return weighted_loss_and_grad(arch, params, prepared);
}

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state, double lr,
               const AdamConfig& cfg) {
    if (params.size() != grad.size()) throw InvalidShape("adam_step: parameter/gradient size mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) throw InvalidShape("adam_step: optimizer state size mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        double m_hat = state.m[i] / bc1;
        double v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

double finite_diff_check(const DenoiserArch& arch, const DenoiserParams& params, const TrainBatch& batch,
                         const NoiseSchedule& sched, bool use_ltd, std::size_t num_coords, double h,
                         std::uint64_t seed) {
    if (num_coords > params.values.size()) throw InvalidInput("finite_diff_check: more coordinates than parameters");
    auto prepared = prepare_batch(batch, sched, use_ltd);
    auto analytic = weighted_loss_and_grad(arch, params, prepared).grad;

    std::vector<std::size_t> order(params.values.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed, 0xFD);
    for (std::size_t i = 0; i < num_coords; ++i) {
        std::swap(order[i], order[i + rng.below(order.size() - i)]);
    }

    DenoiserParams probe = params;
    double worst = 0.0;
    for (std::size_t k = 0; k < num_coords; ++k) {
        const std::size_t i = order[k];
        const double base = params.values[i];
        probe.values[i] = base + h;
        double up = weighted_loss(arch, probe, prepared);
        probe.values[i] = base - h;
        double down = weighted_loss(arch, probe, prepared);
        probe.values[i] = base;
        double numeric = (up - down) / (2.0 * h);
        double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-12});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

std::filesystem::path checkpoint_sidecar(const std::filesystem::path& path) {
    auto side = path;
    side += ".txt";
    return side;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    Tensor flat(Shape{ckpt.params.values.size()}, ckpt.params.values);
    save_tensor(flat, path, Precision::F64);

    KeyValues kv;
    kv.set("model.frames", std::to_string(ckpt.arch.frames));
    kv.set("model.height", std::to_string(ckpt.arch.height));
    kv.set("model.width", std::to_string(ckpt.arch.width));
    kv.set("model.channels", std::to_string(ckpt.arch.channels));
    kv.set("model.hidden_width", std::to_string(ckpt.arch.hidden_width));
    kv.set("model.hidden_layers", std::to_string(ckpt.arch.hidden_layers));
    kv.set("model.time_dim", std::to_string(ckpt.arch.time_dim));
    kv.set("model.cond_dim", std::to_string(ckpt.arch.cond_dim));
    kv.set("model.num_classes", std::to_string(ckpt.arch.num_classes));
    kv.set("schedule.steps", std::to_string(ckpt.timesteps));
    kv.set("schedule.beta_start", format_double(ckpt.beta_start));
    kv.set("schedule.beta_end", format_double(ckpt.beta_end));
    kv.set("train.step", std::to_string(ckpt.train_step));
    for (const auto& [k, v] : ckpt.extra) kv.set("extra." + k, v);

    std::ofstream os(checkpoint_sidecar(path), std::ios::trunc);
    if (!os) throw IoError("cannot write " + checkpoint_sidecar(path).string());
    os << kv.str();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    auto kv = KeyValues::load(checkpoint_sidecar(path));
    Checkpoint ckpt;
    DenoiserArch& a = ckpt.arch;
    a.frames = kv.get_size("model.frames", a.frames);
    a.height = kv.get_size("model.height", a.height);
    a.width = kv.get_size("model.width", a.width);
    a.channels = kv.get_size("model.channels", a.channels);
    a.hidden_width = kv.get_size("model.hidden_width", a.hidden_width);
    a.hidden_layers = kv.get_size("model.hidden_layers", a.hidden_layers);
    a.time_dim = kv.get_size("model.time_dim", a.time_dim);
    a.cond_dim = kv.get_size("model.cond_dim", a.cond_dim);
    a.num_classes = kv.get_size("model.num_classes", a.num_classes);
    ckpt.timesteps = kv.get_size("schedule.steps", ckpt.timesteps);
    ckpt.beta_start = kv.get_double("schedule.beta_start", ckpt.beta_start);
    ckpt.beta_end = kv.get_double("schedule.beta_end", ckpt.beta_end);
    ckpt.train_step = kv.get_size("train.step", 0);
    for (const auto& [k, v] : kv.entries()) {
        if (k.starts_with("extra.")) ckpt.extra[k.substr(6)] = kv.get_string(k, v);
    }
    kv.reject_unknown();

    Tensor flat = load_tensor(path);
    ckpt.params.layout = make_layout(a);
    const auto& last = ckpt.params.layout.back();
    if (flat.rank() != 1 || flat.numel() != last.offset + last.size()) {
        throw FormatError("checkpoint: parameter count does not match architecture in sidecar");
    }
    ckpt.params.values.assign(flat.data().begin(), flat.data().end());
    return ckpt;
}

}  // namespace ltd
