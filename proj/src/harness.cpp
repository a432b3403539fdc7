#include "ltdlab/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ltdlab/error.hpp"
#include "ltdlab/tensor_io.hpp"

namespace ltd {

namespace {

// Independent streams of the master seed.
constexpr std::uint64_t kDataStream = 0xDA7A;
constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kDrawStream = 0xD2A3;

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_mix(std::uint64_t& h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xFF;
        h *= kFnvPrime;
    }
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

std::string format_optional(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string("n/a");
}

void split_csv(const std::string& line, std::vector<std::string>& fields) {
    fields.clear();
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) fields.push_back(item);
}

std::vector<const RunRecord*> trailing(const RunLog& log, LossMode mode, std::size_t window) {
    auto recs = log.mode_records(mode);
    if (recs.size() > window) recs.erase(recs.begin(), recs.end() - static_cast<std::ptrdiff_t>(window));
    return recs;
}

std::vector<double> average_frames(const std::vector<const RunRecord*>& recs, bool ltd_column) {
    if (recs.empty()) return {};
    std::vector<double> avg((ltd_column ? recs.front()->frame_ltd : recs.front()->frame_loss).size(), 0.0);
    for (const auto* r : recs) {
        const auto& src = ltd_column ? r->frame_ltd : r->frame_loss;
        for (std::size_t f = 0; f < avg.size(); ++f) avg[f] += src[f];
    }
    for (auto& v : avg) v /= static_cast<double>(recs.size());
    return avg;
}

}  // namespace

std::string_view to_string(LossMode mode) {
    switch (mode) {
        case LossMode::Baseline: return "baseline";
        case LossMode::Ltd: return "ltd";
        case LossMode::Both: return "both";
    }
    return "unknown";
}

LossMode parse_loss_mode(std::string_view name) {
    if (name == "baseline") return LossMode::Baseline;
    if (name == "ltd") return LossMode::Ltd;
    if (name == "both") return LossMode::Both;
    throw InvalidConfig("mode: expected baseline, ltd or both, got '" + std::string(name) + "'");
}

Shape ExperimentConfig::latent_shape() const {
    return Shape{data.scene.frames / encoder.temporal_factor, data.scene.height / encoder.spatial_factor,
                 data.scene.width / encoder.spatial_factor, encoder.latent_channels};
}

ExperimentConfig parse_experiment_config(const KeyValues& kv) {
    ExperimentConfig cfg;
    cfg.seed = kv.get_u64("seed", cfg.seed);
    cfg.output_dir = kv.get_string("output_dir", cfg.output_dir.string());
    cfg.mode = parse_loss_mode(kv.get_string("mode", std::string(to_string(cfg.mode))));

    auto& d = cfg.data;
    std::vector<std::string> kind_names;
    for (auto k : d.kinds) kind_names.emplace_back(to_string(k));
    d.kinds.clear();
    for (const auto& name : kv.get_string_list("data.kinds", kind_names)) d.kinds.push_back(parse_scene_kind(name));
    d.clips_per_kind = kv.get_size("data.clips_per_kind", d.clips_per_kind);
    auto& s = d.scene;
    s.frames = kv.get_size("data.frames", s.frames);
    s.height = kv.get_size("data.height", s.height);
    s.width = kv.get_size("data.width", s.width);
    s.channels = kv.get_size("data.channels", s.channels);
    s.square_size = kv.get_size("data.square_size", s.square_size);
    s.velocity_x = kv.get_double("data.velocity_x", s.velocity_x);
    s.velocity_y = kv.get_double("data.velocity_y", s.velocity_y);
    s.flicker_amplitude = kv.get_double("data.flicker_amplitude", s.flicker_amplitude);
    s.flicker_period = kv.get_double("data.flicker_period", s.flicker_period);
    s.boundaries = kv.get_size_list("data.boundaries", s.boundaries);

    cfg.encoder.temporal_factor = kv.get_size("encoder.temporal_factor", cfg.encoder.temporal_factor);
    cfg.encoder.spatial_factor = kv.get_size("encoder.spatial_factor", cfg.encoder.spatial_factor);
    cfg.encoder.latent_channels = kv.get_size("encoder.latent_channels", cfg.encoder.latent_channels);
    cfg.encoder.pixel_channels = s.channels;

    cfg.ltd.tau = kv.get_size("ltd.tau", cfg.ltd.tau);
    cfg.ltd.norm = parse_channel_norm(kv.get_string("ltd.norm", std::string(to_string(cfg.ltd.norm))));

    cfg.timesteps = kv.get_size("schedule.steps", cfg.timesteps);
    cfg.beta_start = kv.get_double("schedule.beta_start", cfg.beta_start);
    cfg.beta_end = kv.get_double("schedule.beta_end", cfg.beta_end);

    cfg.model.hidden_width = kv.get_size("model.hidden_width", cfg.model.hidden_width);
    cfg.model.hidden_layers = kv.get_size("model.hidden_layers", cfg.model.hidden_layers);
    cfg.model.time_dim = kv.get_size("model.time_dim", cfg.model.time_dim);
    cfg.model.cond_dim = kv.get_size("model.cond_dim", cfg.model.cond_dim);

    cfg.train.lr = kv.get_double("train.lr", cfg.train.lr);
    cfg.train.steps = kv.get_size("train.steps", cfg.train.steps);
    cfg.train.batch_size = kv.get_size("train.batch_size", cfg.train.batch_size);
    cfg.train.cond_dropout = kv.get_double("train.cond_dropout", cfg.train.cond_dropout);
    cfg.train.checkpoint_every = kv.get_size("train.checkpoint_every", cfg.train.checkpoint_every);

    cfg.report_window = kv.get_size("report.window", cfg.report_window);
    kv.reject_unknown();

    if (const char* env = std::getenv("LTD_SEED"); env && *env) {
        KeyValues override_kv = KeyValues::parse(std::string("seed = ") + env, "LTD_SEED");
        cfg.seed = override_kv.get_u64("seed", cfg.seed);
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return parse_experiment_config(KeyValues::load(path));
}

KeyValues to_key_values(const ExperimentConfig& cfg) {
    KeyValues kv;
    kv.set("seed", std::to_string(cfg.seed));
    kv.set("output_dir", cfg.output_dir.string());
    kv.set("mode", std::string(to_string(cfg.mode)));
    std::string kinds;
    for (auto k : cfg.data.kinds) kinds += (kinds.empty() ? "" : ",") + std::string(to_string(k));
    kv.set("data.kinds", kinds);
    const auto& s = cfg.data.scene;
    kv.set("data.clips_per_kind", std::to_string(cfg.data.clips_per_kind));
    kv.set("data.frames", std::to_string(s.frames));
    kv.set("data.height", std::to_string(s.height));
    kv.set("data.width", std::to_string(s.width));
    kv.set("data.channels", std::to_string(s.channels));
    kv.set("data.square_size", std::to_string(s.square_size));
    kv.set("data.velocity_x", format_double(s.velocity_x));
    kv.set("data.velocity_y", format_double(s.velocity_y));
    kv.set("data.flicker_amplitude", format_double(s.flicker_amplitude));
    kv.set("data.flicker_period", format_double(s.flicker_period));
    kv.set("data.boundaries", join_sizes(s.boundaries));
    kv.set("encoder.temporal_factor", std::to_string(cfg.encoder.temporal_factor));
    kv.set("encoder.spatial_factor", std::to_string(cfg.encoder.spatial_factor));
    kv.set("encoder.latent_channels", std::to_string(cfg.encoder.latent_channels));
    kv.set("ltd.tau", std::to_string(cfg.ltd.tau));
    kv.set("ltd.norm", std::string(to_string(cfg.ltd.norm)));
    kv.set("schedule.steps", std::to_string(cfg.timesteps));
    kv.set("schedule.beta_start", format_double(cfg.beta_start));
    kv.set("schedule.beta_end", format_double(cfg.beta_end));
    kv.set("model.hidden_width", std::to_string(cfg.model.hidden_width));
    kv.set("model.hidden_layers", std::to_string(cfg.model.hidden_layers));
    kv.set("model.time_dim", std::to_string(cfg.model.time_dim));
    kv.set("model.cond_dim", std::to_string(cfg.model.cond_dim));
    kv.set("train.lr", format_double(cfg.train.lr));
    kv.set("train.steps", std::to_string(cfg.train.steps));
    kv.set("train.batch_size", std::to_string(cfg.train.batch_size));
    kv.set("train.cond_dropout", format_double(cfg.train.cond_dropout));
    kv.set("train.checkpoint_every", std::to_string(cfg.train.checkpoint_every));
    kv.set("report.window", std::to_string(cfg.report_window));
    return kv;
}

void validate(ExperimentConfig& cfg) {
    if (cfg.data.kinds.empty()) throw InvalidConfig("data.kinds: at least one kind required");
    if (cfg.data.clips_per_kind < 1) throw InvalidConfig("data.clips_per_kind: must be >= 1");
    for (auto kind : cfg.data.kinds) {
        SceneSpec probe = cfg.data.scene;
        probe.kind = kind;
        try {
            validate(probe);
        } catch (const InvalidSpec& e) {
            throw InvalidConfig(std::string("data.") + e.what());
        }
    }
    cfg.encoder.pixel_channels = cfg.data.scene.channels;
    validate(cfg.encoder);
    if (cfg.data.scene.frames % cfg.encoder.temporal_factor != 0) {
        throw InvalidConfig("encoder.temporal_factor: does not divide data.frames");
    }
    if (cfg.data.scene.height % cfg.encoder.spatial_factor != 0 ||
        cfg.data.scene.width % cfg.encoder.spatial_factor != 0) {
        throw InvalidConfig("encoder.spatial_factor: does not divide data.height/data.width");
    }
    validate(cfg.ltd);
    (void)cfg.schedule();
    auto latent = cfg.latent_shape();
    cfg.model.frames = latent[0];
    cfg.model.height = latent[1];
    cfg.model.width = latent[2];
    cfg.model.channels = latent[3];
    cfg.model.num_classes = kNumClasses;
    validate(cfg.model);
    if (!(cfg.train.lr > 0.0)) throw InvalidConfig("train.lr: must be positive");
    if (cfg.train.steps < 1) throw InvalidConfig("train.steps: must be >= 1");
    if (cfg.train.batch_size < 1) throw InvalidConfig("train.batch_size: must be >= 1");
    if (!(cfg.train.cond_dropout >= 0.0 && cfg.train.cond_dropout <= 1.0)) {
        throw InvalidConfig("train.cond_dropout: must lie in [0,1]");
    }
    if (cfg.report_window < 1) throw InvalidConfig("report.window: must be >= 1");
}

std::vector<SceneSpec> corpus_specs(const ExperimentConfig& cfg) {
    std::vector<SceneSpec> specs;
    Rng seeds(cfg.seed, kDataStream);
    for (auto kind : cfg.data.kinds) {
        for (std::size_t i = 0; i < cfg.data.clips_per_kind; ++i) {
            SceneSpec spec = cfg.data.scene;
            spec.kind = kind;
            spec.seed = seeds.next_u64();
            specs.push_back(spec);
        }
    }
    return specs;
}

std::vector<CorpusClip> build_corpus(const ExperimentConfig& cfg) {
    std::vector<CorpusClip> corpus;
    for (const auto& spec : corpus_specs(cfg)) {
        auto clip = generate(spec);
        CorpusClip c;
        c.spec = spec;
        c.label = clip.label;
        c.z0 = pseudo_encode(clip.video, cfg.encoder);
        c.d = ltd_map(c.z0, cfg.ltd);
        corpus.push_back(std::move(c));
    }
    return corpus;
}

void write_dataset(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::ofstream manifest(dir / "manifest.tsv", std::ios::trunc);
    if (!manifest) throw IoError("cannot write " + (dir / "manifest.tsv").string());
    std::size_t index = 0;
    for (const auto& spec : corpus_specs(cfg)) {
        auto clip = generate(spec);
        char name[32];
        std::snprintf(name, sizeof(name), "clip_%04zu.ltdt", index++);
        save_tensor(clip.video.tensor, dir / name);
        manifest << name << '\t' << to_string(spec.kind) << '\t' << clip.label << '\t' << spec.seed << '\n';
    }
    if (!manifest) throw IoError("write failed: " + (dir / "manifest.tsv").string());
}

StepDraws draw_step(const ExperimentConfig& cfg, std::size_t corpus_size, std::size_t step) {
    if (corpus_size == 0) throw InvalidInput("draw_step: empty corpus");
    Rng rng = Rng(cfg.seed, kDrawStream).split(step);
    Shape shape = cfg.latent_shape();
    StepDraws d;
    std::uint64_t h = kFnvOffset;
    for (std::size_t b = 0; b < cfg.train.batch_size; ++b) {
        d.clip.push_back(rng.below(corpus_size));
        d.t.push_back(1 + rng.below(cfg.timesteps));
        bool drop = rng.uniform() <= cfg.train.cond_dropout;
        d.cond.push_back(drop ? kNullClass : -1);  // label resolved in make_batch
        d.eps.push_back(sample_gaussian(rng, shape));
        fnv_mix(h, d.clip.back());
        fnv_mix(h, d.t.back());
        fnv_mix(h, static_cast<std::uint64_t>(drop));
        for (double v : d.eps.back().data()) fnv_mix(h, std::bit_cast<std::uint64_t>(v));
    }
    d.digest = h;
    return d;
}

TrainBatch make_batch(const std::vector<CorpusClip>& corpus, const StepDraws& draws) {
    TrainBatch batch;
    for (std::size_t b = 0; b < draws.clip.size(); ++b) {
        const auto& clip = corpus.at(draws.clip[b]);
        batch.push_back({clip.z0, clip.d, draws.t[b], draws.eps[b], draws.cond[b] < 0 ? clip.label : draws.cond[b]});
    }
    return batch;
}

std::vector<const RunRecord*> RunLog::mode_records(LossMode mode) const {
    std::vector<const RunRecord*> out;
    for (const auto& r : records) {
        if (r.mode == mode) out.push_back(&r);
    }
    return out;
}

bool RunLog::has_mode(LossMode mode) const {
    return std::any_of(records.begin(), records.end(), [&](const RunRecord& r) { return r.mode == mode; });
}

void write_run_log(const RunLog& log, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    std::size_t frames = log.records.empty() ? 0 : log.records.front().frame_loss.size();
    os << "step,mode,total_loss,unweighted_loss,mean_ltd,draw_digest";
    for (std::size_t f = 0; f < frames; ++f) os << ",frame_loss_" << f;
    for (std::size_t f = 0; f < frames; ++f) os << ",frame_ltd_" << f;
    os << '\n';
    for (const auto& r : log.records) {
        char digest[24];
        std::snprintf(digest, sizeof(digest), "%016llx", static_cast<unsigned long long>(r.draw_digest));
        os << r.step << ',' << to_string(r.mode) << ',' << format_double(r.total_loss) << ','
           << format_double(r.unweighted_loss) << ',' << format_double(r.mean_ltd) << ',' << digest;
        for (double v : r.frame_loss) os << ',' << format_double(v);
        for (double v : r.frame_ltd) os << ',' << format_double(v);
        os << '\n';
    }
    if (!os) throw IoError("write failed: " + path.string());
}

RunLog read_run_log(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw FormatError("run log: missing header in " + path.string());
    std::vector<std::string> cols;
    split_csv(line, cols);
    if (cols.size() < 6 || cols[0] != "step" || (cols.size() - 6) % 2 != 0) {
        throw FormatError("run log: unexpected header in " + path.string());
    }
    const std::size_t frames = (cols.size() - 6) / 2;
    RunLog log;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        split_csv(line, cols);
        if (cols.size() != 6 + 2 * frames) {
            throw FormatError("run log: wrong column count at line " + std::to_string(line_no));
        }
        try {
            RunRecord r;
            r.step = std::stoull(cols[0]);
            r.mode = parse_loss_mode(cols[1]);
            r.total_loss = std::stod(cols[2]);
            r.unweighted_loss = std::stod(cols[3]);
            r.mean_ltd = std::stod(cols[4]);
            r.draw_digest = std::stoull(cols[5], nullptr, 16);
            for (std::size_t f = 0; f < frames; ++f) r.frame_loss.push_back(std::stod(cols[6 + f]));
            for (std::size_t f = 0; f < frames; ++f) r.frame_ltd.push_back(std::stod(cols[6 + frames + f]));
            log.records.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw FormatError("run log: unparsable value at line " + std::to_string(line_no));
        }
    }
    return log;
}

DenoiserParams initial_params(const ExperimentConfig& cfg) {
    Rng rng(cfg.seed, kInitStream);
    return init_params(cfg.model, rng);
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, LossMode mode,
                                      std::optional<std::size_t> step) {
    std::string name = "checkpoint_" + std::string(to_string(mode));
    if (step) name += "_step" + std::to_string(*step);
    return dir / (name + ".ltdt");
}

Checkpoint make_checkpoint(const ExperimentConfig& cfg, LossMode mode, const DenoiserParams& params,
                           std::size_t updates) {
    Checkpoint ckpt;
    ckpt.arch = cfg.model;
    ckpt.params = params;
    ckpt.timesteps = cfg.timesteps;
    ckpt.beta_start = cfg.beta_start;
    ckpt.beta_end = cfg.beta_end;
    ckpt.train_step = updates;
    ckpt.extra["mode"] = to_string(mode);
    ckpt.extra["seed"] = std::to_string(cfg.seed);
    ckpt.extra["encoder.temporal_factor"] = std::to_string(cfg.encoder.temporal_factor);
    ckpt.extra["encoder.spatial_factor"] = std::to_string(cfg.encoder.spatial_factor);
    ckpt.extra["encoder.latent_channels"] = std::to_string(cfg.encoder.latent_channels);
    ckpt.extra["encoder.pixel_channels"] = std::to_string(cfg.encoder.pixel_channels);
    return ckpt;
}

RunLog train_mode(const ExperimentConfig& cfg, const std::vector<CorpusClip>& corpus, LossMode mode,
                  DenoiserParams* final_params, const std::filesystem::path* checkpoint_dir) {
    if (mode == LossMode::Both) throw InvalidInput("train_mode: expects a single mode");
    const auto sched = cfg.schedule();
    DenoiserParams params = initial_params(cfg);
    AdamState adam;
    RunLog log;
    const bool use_ltd = mode == LossMode::Ltd;
    const std::size_t every = cfg.train.checkpoint_every;

    for (std::size_t step = 1; step <= cfg.train.steps; ++step) {
        const std::size_t updates = step - 1;
        if (checkpoint_dir && every > 0 && updates % every == 0) {
            save_checkpoint(make_checkpoint(cfg, mode, params, updates), checkpoint_path(*checkpoint_dir, mode, updates));
        }
        auto draws = draw_step(cfg, corpus.size(), step);
        auto batch = make_batch(corpus, draws);
        auto lg = loss_and_grad(cfg.model, params, batch, sched, use_ltd);
        for (double g : lg.grad) {
            if (!std::isfinite(g)) throw NumericalError("training: non-finite gradient at step " + std::to_string(step));
        }

        RunRecord r;
        r.step = step;
        r.mode = mode;
        r.total_loss = lg.loss;
        r.unweighted_loss = lg.unweighted_loss;
        r.draw_digest = draws.digest;
        r.frame_loss = std::move(lg.per_frame_loss);
        r.frame_ltd.assign(cfg.model.frames, 0.0);
        for (const auto& ex : batch) {
            auto means = frame_means(ex.d.tensor);
            for (std::size_t f = 0; f < means.size(); ++f) r.frame_ltd[f] += means[f];
        }
        double total_ltd = 0.0;
        for (auto& v : r.frame_ltd) {
            v /= static_cast<double>(batch.size());
            total_ltd += v;
        }
        r.mean_ltd = total_ltd / static_cast<double>(r.frame_ltd.size());
        log.records.push_back(std::move(r));

        adam_step(params.values, lg.grad, adam, cfg.train.lr);
    }
    for (double v : params.values) {
        if (!std::isfinite(v)) throw NumericalError("training: non-finite parameters");
    }
    if (checkpoint_dir) {
        save_checkpoint(make_checkpoint(cfg, mode, params, cfg.train.steps), checkpoint_path(*checkpoint_dir, mode));
        if (every > 0 && cfg.train.steps % every == 0) {
            save_checkpoint(make_checkpoint(cfg, mode, params, cfg.train.steps),
                            checkpoint_path(*checkpoint_dir, mode, cfg.train.steps));
        }
    }
    if (final_params) *final_params = std::move(params);
    return log;
}

RunLog run_training(ExperimentConfig cfg) {
    validate(cfg);
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.output_dir.string() + ": " + ec.message());
    {
        std::ofstream probe(cfg.output_dir / "config.txt", std::ios::trunc);
        if (!probe) throw IoError("output directory not writable: " + cfg.output_dir.string());
        probe << to_key_values(cfg).str();
    }

    auto corpus = build_corpus(cfg);
    RunLog log;
    std::vector<LossMode> modes;
    if (cfg.mode == LossMode::Both) {
        modes = {LossMode::Baseline, LossMode::Ltd};
    } else {
        modes = {cfg.mode};
    }
    for (auto mode : modes) {
        auto part = train_mode(cfg, corpus, mode, nullptr, &cfg.output_dir);
        log.records.insert(log.records.end(), part.records.begin(), part.records.end());
    }
    write_run_log(log, cfg.output_dir / "run_log.csv");
    return log;
}

std::optional<double> peak_to_mean(const std::vector<double>& curve) {
    if (curve.empty()) return std::nullopt;
    double sum = 0.0;
    for (double v : curve) sum += v;
    double mean = sum / static_cast<double>(curve.size());
    if (!(mean > 0.0)) return std::nullopt;
    return *std::max_element(curve.begin(), curve.end()) / mean;
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) return std::nullopt;
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
    return sab / std::sqrt(saa * sbb);
}

FrameProfile frame_profile(const RunLog& log, std::size_t window) {
    if (window < 1) throw InvalidConfig("report.window: empty window");
    if (log.records.empty()) throw InvalidInput("frame profile: empty run log");
    auto base = trailing(log, LossMode::Baseline, window);
    auto ours = trailing(log, LossMode::Ltd, window);

    auto ltd_curve = average_frames(base.empty() ? ours : base, true);
    auto base_curve = average_frames(base, false);
    auto ours_curve = average_frames(ours, false);

    FrameProfile p;
    for (std::size_t f = 0; f < ltd_curve.size(); ++f) {
        FrameProfileRow row;
        row.frame = f;
        row.mean_ltd = ltd_curve[f];
        if (!base_curve.empty()) row.baseline_loss = base_curve[f];
        if (!ours_curve.empty()) row.ltd_loss = ours_curve[f];
        p.rows.push_back(row);
    }
    p.ltd_peak_to_mean = peak_to_mean(ltd_curve);
    if (!base_curve.empty()) {
        p.baseline_peak_to_mean = peak_to_mean(base_curve);
        p.correlation = pearson(ltd_curve, base_curve);
    }
    if (!ours_curve.empty()) p.ltd_run_peak_to_mean = peak_to_mean(ours_curve);
    return p;
}

FrameProfile report_frame_profile(const RunLog& log, std::size_t window, const std::filesystem::path& out) {
    auto p = frame_profile(log, window);
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
    std::ofstream csv(out / "frames.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write " + (out / "frames.csv").string());
    csv << "frame_index,mean_ltd,baseline_loss,ltd_loss\n";
    for (const auto& r : p.rows) {
        csv << r.frame << ',' << format_double(r.mean_ltd) << ',' << format_optional(r.baseline_loss) << ','
            << format_optional(r.ltd_loss) << '\n';
    }
    std::ofstream summary(out / "frames_summary.txt", std::ios::trunc);
    if (!summary) throw IoError("cannot write " + (out / "frames_summary.txt").string());
    summary << "window = " << window << '\n'
            << "mean_ltd.peak_to_mean = " << format_optional(p.ltd_peak_to_mean) << '\n'
            << "baseline_loss.peak_to_mean = " << format_optional(p.baseline_peak_to_mean) << '\n'
            << "ltd_loss.peak_to_mean = " << format_optional(p.ltd_run_peak_to_mean) << '\n'
            << "pearson.mean_ltd.baseline_loss = " << format_optional(p.correlation) << '\n';
    return p;
}

std::vector<FrameRange> report_heatmaps(const LatentVideo& latent, const LtdConfig& cfg,
                                        const std::filesystem::path& out) {
    return write_heatmaps(weight_map(ltd_map(latent, cfg)).tensor, out);
}

PeakReport compare_peaks(const std::vector<RunLog>& logs, std::size_t window) {
    if (window < 1) throw InvalidConfig("report.window: empty window");
    if (logs.empty()) throw InvalidInput("compare_peaks: no run logs");
    PeakReport report;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const auto& log = logs[i];
        if (!log.has_mode(LossMode::Baseline) || !log.has_mode(LossMode::Ltd)) {
            throw InvalidInput("compare_peaks: log " + std::to_string(i) + " lacks a baseline or ltd run");
        }
        auto base = peak_to_mean(average_frames(trailing(log, LossMode::Baseline, window), false));
        auto ours = peak_to_mean(average_frames(trailing(log, LossMode::Ltd, window), false));
        if (!base || !ours) throw InvalidInput("compare_peaks: degenerate per-frame loss in log " + std::to_string(i));
        report.per_seed.push_back({*base, *ours});
    }
    for (const auto& e : report.per_seed) {
        report.mean_baseline_ratio += e.baseline_ratio;
        report.mean_ltd_ratio += e.ltd_ratio;
        if (e.ltd_ratio < e.baseline_ratio) ++report.seeds_reduced;
    }
    const double n = static_cast<double>(report.per_seed.size());
    report.mean_baseline_ratio /= n;
    report.mean_ltd_ratio /= n;
    report.mean_reduction = report.mean_baseline_ratio - report.mean_ltd_ratio;
    return report;
}

void write_peak_report(const PeakReport& report, const std::filesystem::path& out) {
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
    std::ofstream csv(out / "peaks.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write " + (out / "peaks.csv").string());
    csv << "run,baseline_peak_to_mean,ltd_peak_to_mean,reduction\n";
    for (std::size_t i = 0; i < report.per_seed.size(); ++i) {
        const auto& e = report.per_seed[i];
        csv << i << ',' << format_double(e.baseline_ratio) << ',' << format_double(e.ltd_ratio) << ','
            << format_double(e.reduction()) << '\n';
    }
    csv << "mean," << format_double(report.mean_baseline_ratio) << ',' << format_double(report.mean_ltd_ratio) << ','
        << format_double(report.mean_reduction) << '\n';
}

}  // namespace ltd
