#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ltdlab/diffusion.hpp"
#include "ltdlab/error.hpp"
#include "ltdlab/harness.hpp"
#include "ltdlab/ltd.hpp"
#include "ltdlab/synthetic.hpp"
#include "ltdlab/tensor_io.hpp"

namespace py = pybind11;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

ltd::Tensor to_tensor(const Array& a) {
    std::vector<std::size_t> dims(a.shape(), a.shape() + a.ndim());
    std::vector<double> data(a.data(), a.data() + a.size());
    return ltd::Tensor(ltd::Shape(dims), std::move(data));
}

Array to_array(const ltd::Tensor& t) {
    const auto dims = t.shape().dims();
    Array out(std::vector<py::ssize_t>(dims.begin(), dims.end()));
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

ltd::SceneSpec scene_from(const std::string& kind, std::uint64_t seed, const py::kwargs& kw) {
    ltd::SceneSpec s;
    s.kind = ltd::parse_scene_kind(kind);
    s.seed = seed;
    for (auto [key, value] : kw) {
        auto k = key.cast<std::string>();
        if (k == "frames") s.frames = value.cast<std::size_t>();
        else if (k == "height") s.height = value.cast<std::size_t>();
        else if (k == "width") s.width = value.cast<std::size_t>();
        else if (k == "channels") s.channels = value.cast<std::size_t>();
        else if (k == "square_size") s.square_size = value.cast<std::size_t>();
        else if (k == "velocity") std::tie(s.velocity_x, s.velocity_y) = value.cast<std::pair<double, double>>();
        else if (k == "start") {
            auto [x, y] = value.cast<std::pair<double, double>>();
            s.start_x = x;
            s.start_y = y;
        } else if (k == "flicker_amplitude") s.flicker_amplitude = value.cast<double>();
        else if (k == "flicker_period") s.flicker_period = value.cast<double>();
        else if (k == "boundaries") s.boundaries = value.cast<std::vector<std::size_t>>();
        else throw ltd::InvalidSpec(k + ": unknown scene field");
    }
    return s;
}

py::dict record_dict(const ltd::RunRecord& r) {
    py::dict d;
    d["step"] = r.step;
    d["mode"] = std::string(ltd::to_string(r.mode));
    d["total_loss"] = r.total_loss;
    d["unweighted_loss"] = r.unweighted_loss;
    d["mean_ltd"] = r.mean_ltd;
    d["draw_digest"] = r.draw_digest;
    d["frame_loss"] = r.frame_loss;
    d["frame_ltd"] = r.frame_ltd;
    return d;
}

}  // namespace

PYBIND11_MODULE(_ltdlab, m) {
    m.doc() = "Latent temporal discrepancy weighting for video diffusion";

    auto base = py::register_exception<ltd::Error>(m, "LtdError", PyExc_RuntimeError);
    py::register_exception<ltd::InvalidShape>(m, "InvalidShape", base.ptr());
    py::register_exception<ltd::InvalidConfig>(m, "InvalidConfig", base.ptr());
    py::register_exception<ltd::InvalidSpec>(m, "InvalidSpec", base.ptr());
    py::register_exception<ltd::InvalidInput>(m, "InvalidInput", base.ptr());
    py::register_exception<ltd::FormatError>(m, "FormatError", base.ptr());
    py::register_exception<ltd::IoError>(m, "IoError", base.ptr());
    py::register_exception<ltd::NumericalError>(m, "NumericalError", base.ptr());

    m.def(
        "ltd_map",
        [](const Array& z, std::size_t tau, const std::string& norm) {
            return to_array(ltd::ltd_map(ltd::LatentVideo(to_tensor(z)), {tau, ltd::parse_channel_norm(norm)}).tensor);
        },
        py::arg("z"), py::arg("tau") = 3, py::arg("norm") = "l2",
        "Per-voxel windowed mean of consecutive latent-frame difference norms; (F,H,W,C) -> (F,H,W).");
    m.def(
        "ltd_map_bruteforce",
        [](const Array& z, std::size_t tau, const std::string& norm) {
            return to_array(
                ltd::ltd_map_bruteforce(ltd::LatentVideo(to_tensor(z)), {tau, ltd::parse_channel_norm(norm)}).tensor);
        },
        py::arg("z"), py::arg("tau") = 3, py::arg("norm") = "l2");
    m.def(
        "weight_map", [](const Array& d) { return to_array(ltd::weight_map(ltd::DiscrepancyTensor(to_tensor(d))).tensor); },
        py::arg("d"), "ln(e + D)");

    m.def(
        "generate",
        [](const std::string& kind, std::uint64_t seed, const py::kwargs& kw) {
            auto clip = ltd::generate(scene_from(kind, seed, kw));
            return py::make_tuple(to_array(clip.video.tensor), clip.label);
        },
        py::arg("kind"), py::arg("seed") = 0,
        "Synthetic pixel video (F,H,W,C) and its class label. Scene fields go in keyword arguments.");
    m.def(
        "pseudo_encode",
        [](const Array& video, std::size_t temporal_factor, std::size_t spatial_factor, std::size_t latent_channels) {
            ltd::PixelVideo x(to_tensor(video));
            ltd::EncoderConfig cfg{temporal_factor, spatial_factor, latent_channels, x.channels()};
            return to_array(ltd::pseudo_encode(x, cfg).tensor);
        },
        py::arg("video"), py::arg("temporal_factor") = 2, py::arg("spatial_factor") = 4, py::arg("latent_channels") = 4);

    m.def(
        "alpha_bars",
        [](std::size_t steps, double beta_start, double beta_end) {
            auto s = ltd::make_linear_schedule(steps, beta_start, beta_end);
            std::vector<double> out;
            for (std::size_t t = 1; t <= steps; ++t) out.push_back(s.alpha_bar(t));
            return out;
        },
        py::arg("steps") = ltd::kDefaultTimesteps, py::arg("beta_start") = ltd::kDefaultBetaStart,
        py::arg("beta_end") = ltd::kDefaultBetaEnd, "Cumulative alpha products for t = 1..steps.");
    m.def(
        "q_sample",
        [](const Array& z0, std::size_t t, const Array& eps) {
            return to_array(ltd::q_sample(to_tensor(z0), t, to_tensor(eps), ltd::make_linear_schedule()));
        },
        py::arg("z0"), py::arg("t"), py::arg("eps"));
    m.def(
        "ltd_loss",
        [](const Array& eps, const Array& eps_pred, const Array& d) {
            auto l = ltd::ltd_loss(to_tensor(eps), to_tensor(eps_pred), ltd::DiscrepancyTensor(to_tensor(d)));
            return py::make_tuple(l.total, l.unweighted);
        },
        py::arg("eps"), py::arg("eps_pred"), py::arg("d"), "Returns (weighted total, unweighted MSE).");
    m.def("ddim_timesteps", &ltd::ddim_timesteps, py::arg("num_steps"), py::arg("total_steps") = ltd::kDefaultTimesteps);

    m.def(
        "load_tensor", [](const std::filesystem::path& p) { return to_array(ltd::load_tensor(p)); }, py::arg("path"));
    m.def(
        "save_tensor",
        [](const Array& a, const std::filesystem::path& p, bool f64) {
            ltd::save_tensor(to_tensor(a), p, f64 ? ltd::Precision::F64 : ltd::Precision::F32);
        },
        py::arg("array"), py::arg("path"), py::arg("f64") = false);

    m.def(
        "train",
        [](const std::string& config_text, const std::filesystem::path& output_dir) {
            auto kv = ltd::KeyValues::parse(config_text, "<python>");
            kv.set("output_dir", output_dir.string());
            auto cfg = ltd::parse_experiment_config(kv);
            ltd::RunLog log;
            {
                py::gil_scoped_release release;
                log = ltd::run_training(cfg);
            }
            py::list out;
            for (const auto& r : log.records) out.append(record_dict(r));
            return out;
        },
        py::arg("config_text"), py::arg("output_dir"),
        "Run training from key = value config text; writes artifacts to output_dir and returns the run log.");
    m.def(
        "compare_peaks",
        [](const std::vector<std::filesystem::path>& logs, std::size_t window) {
            std::vector<ltd::RunLog> runs;
            for (const auto& p : logs) runs.push_back(ltd::read_run_log(p));
            auto rep = ltd::compare_peaks(runs, window);
            py::dict d;
            std::vector<std::pair<double, double>> per;
            for (const auto& e : rep.per_seed) per.emplace_back(e.baseline_ratio, e.ltd_ratio);
            d["per_run"] = per;
            d["mean_baseline_ratio"] = rep.mean_baseline_ratio;
            d["mean_ltd_ratio"] = rep.mean_ltd_ratio;
            d["runs_reduced"] = rep.seeds_reduced;
            return d;
        },
        py::arg("logs"), py::arg("window") = 50);
}
