// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvedit/config.hpp"
#include "kvedit/edit.hpp"
#include "kvedit/error.hpp"
#include "kvedit/harness.hpp"
#include "kvedit/io.hpp"
#include "kvedit/metrics.hpp"
#include "kvedit/probe.hpp"
#include "kvedit/prominence.hpp"
#include "kvedit/report.hpp"
#include "kvedit/sampler.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace kvedit;

namespace {

using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

F32Array video_array(const Video& v) {
    F32Array a({v.frames, v.height, v.width, 3});
    std::copy(v.pixels.begin(), v.pixels.end(), a.mutable_data());
    return a;
}

Video video_from_array(const F32Array& a) {
    require(a.ndim() == 4 && a.shape(3) == 3, ErrorKind::config, "video array must be [F, H, W, 3]");
    Video v(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
    std::copy(a.data(), a.data() + a.size(), v.pixels.begin());
    return v;
}

F32Array latent_array(const LatentVideo& l) {
    const auto t = to_tensor(l);
    std::vector<py::ssize_t> shape(t.dims.begin(), t.dims.end());
    F32Array a(shape);
    std::copy(t.data.begin(), t.data.end(), a.mutable_data());
    return a;
}

RegionMask region_from_array(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
    require(a.ndim() == 3, ErrorKind::config, "region mask must be [F, H, W]");
    RegionMask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
    for (py::ssize_t i = 0; i < a.size(); ++i) {
        m.fg[static_cast<size_t>(i)] = a.data()[i] ? 1 : 0;
    }
    return m;
}

// JSON crosses the boundary as a string; the Python side wraps it with json.
ExperimentConfig config_from(const std::string& json_text) {
    return json_text.empty() ? ExperimentConfig{} : ExperimentConfig::from_json(Json::parse(json_text));
}

py::dict edit_dict(const EditResult& r) {
    py::dict d;
    d["source_video"] = video_array(r.source_video);
    d["target_video"] = video_array(r.target_video);
    d["source_latent"] = latent_array(r.source_latent);
    d["target_latent"] = latent_array(r.target_latent);
    d["delta_words"] = r.delta.words;
    d["delta_indices"] = r.delta.indices;
    d["divergence"] = r.divergence;
    d["warnings"] = r.warnings;
    if (r.mask) {
        const auto t = mask_tensor(*r.mask);
        F32Array m({t.dims[0], t.dims[1], t.dims[2]});
        std::copy(t.data.begin(), t.data.end(), m.mutable_data());
        d["mask"] = m;
    } else {
        d["mask"] = py::none();
    }
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "kvedit native core";

    static py::exception<Error> error_type(m, "KveditError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            const std::string msg = std::string(error_kind_name(e.kind())) + ": " + e.what();
            PyErr_SetString(error_type.ptr(), msg.c_str());
        }
    });

    py::class_<Pipeline>(m, "Pipeline")
        .def(py::init([](const std::string& config_json) { return config_from(config_json).pipeline(); }),
             py::arg("config_json") = "")
        .def_property_readonly("num_layers", [](const Pipeline& p) { return p.model().config().num_layers; })
        .def_property_readonly("steps", [](const Pipeline& p) { return p.schedule().steps; })
        .def("checksum", [](const Pipeline& p) { return p.model().checksum(); })
        .def(
            "sample",
            [](const Pipeline& p, const std::string& prompt, std::uint64_t seed) {
                SampleResult r;
                {
                    py::gil_scoped_release release;
                    r = sample(p, prompt, seed);
                }
                return py::make_tuple(video_array(r.video), latent_array(r.latent));
            },
            py::arg("prompt"), py::arg("seed") = 0, "Returns (video [F,H,W,3], latent [F,h,w,C]).")
        .def(
            "invert",
            [](const Pipeline& p, const F32Array& video, const std::string& prompt) {
                const Video v = video_from_array(video);
                LatentVideo z;
                {
                    py::gil_scoped_release release;
                    z = ddim_invert(p, v, prompt);
                }
                return latent_array(z);
            },
            py::arg("video"), py::arg("prompt"));

    m.def(
        "default_config", [] { return dump_json(ExperimentConfig{}.to_json()); },
        "Resolved default configuration as JSON text.");

    m.def(
        "object_addition",
        [](const std::string& config_json, const std::string& src, const std::string& trg) {
            const ExperimentConfig c = config_from(config_json);
            const Pipeline p = c.pipeline();
            EditResult r;
            {
                py::gil_scoped_release release;
                r = object_addition(p, src, trg, c.seed, c.plan(EditMode::object_addition));
            }
            return edit_dict(r);
        },
        py::arg("config_json"), py::arg("src"), py::arg("trg"));

    m.def(
        "non_rigid_edit",
        [](const std::string& config_json, const std::string& src, const std::string& trg) {
            const ExperimentConfig c = config_from(config_json);
            const Pipeline p = c.pipeline();
            EditResult r;
            {
                py::gil_scoped_release release;
                r = non_rigid_edit(p, src, trg, c.seed, c.plan(EditMode::non_rigid));
            }
            return edit_dict(r);
        },
        py::arg("config_json"), py::arg("src"), py::arg("trg"));

    m.def(
        "delta_tokens",
        [](const std::string& src, const std::string& trg) {
            const auto d = find_delta_tokens(src, trg);
            return py::make_tuple(d.indices, d.words);
        },
        py::arg("src"), py::arg("trg"));

    m.def("rescale_attention", &rescale_attention, py::arg("x"), py::arg("k") = 10.0, py::arg("c_k") = 0.1);
    m.def("normalized_similarity", &normalized_similarity, py::arg("psnr"), py::arg("psnr_min"),
          py::arg("psnr_max"), py::arg("c") = kDefaultProminenceC);
    m.def("prominence", &prominence, py::arg("s_fg"), py::arg("s_bg"));
    m.def(
        "pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); },
        py::arg("x"), py::arg("y"));
    m.def("overall_score", py::overload_cast<double, double, double, double, double>(&overall_score),
          py::arg("clip_all"), py::arg("tf"), py::arg("ms"), py::arg("sc"), py::arg("bc"));
    m.def(
        "psnr_region",
        [](const F32Array& a, const F32Array& b, const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& mask,
           bool foreground) {
            return psnr_region(video_from_array(a), video_from_array(b), region_from_array(mask),
                               foreground ? Region::fg : Region::bg);
        },
        py::arg("a"), py::arg("b"), py::arg("mask"), py::arg("foreground") = true);

    m.def(
        "vitality_sweep",
        [](const std::string& config_json) {
            const ExperimentConfig c = config_from(config_json);
            const Pipeline p = c.pipeline();
            VitalityReport r;
            {
                py::gil_scoped_release release;
                const PromptSet prompts = PromptSet::bundled(c.probe.n_p, c.seed);
                const auto bypass = run_probe_sweep(p, ProbeMode::bypass, prompts, c.workers);
                const auto rope = run_probe_sweep(p, ProbeMode::rope_drop, prompts, c.workers);
                r = build_vitality_report(bypass, rope, ToyPerceptualEmbedder());
            }
            return dump_json(to_json(r));
        },
        py::arg("config_json"), "Runs both probe sweeps; returns the vitality report as JSON text.");

    m.def(
        "clip_img",
        [](const F32Array& a, const F32Array& b) {
            return clip_img(video_from_array(a), video_from_array(b), ToyClipEmbedder());
        },
        py::arg("src"), py::arg("trg"));

    m.def(
        "run_command",
        [](const std::string& command, const std::string& config_json, const std::string& inputs_json,
           const std::string& out) {
            CommandRequest rq{command, config_from(config_json),
                              inputs_json.empty() ? Json::object() : Json::parse(inputs_json), out};
            CommandResult r;
            {
                py::gil_scoped_release release;
                r = run_command(rq);
            }
            return py::make_tuple(r.dir.string(), dump_json(r.manifest.to_json()));
        },
        py::arg("command"), py::arg("config_json"), py::arg("inputs_json"), py::arg("out"),
        "Harness entry point; returns (directory, manifest JSON text).");

    m.def(
        "read_tensor",
        [](const std::string& path) {
            const Tensor t = kvedit::read_tensor(path);
            std::vector<py::ssize_t> shape(t.dims.begin(), t.dims.end());
            F32Array a(shape);
            std::copy(t.data.begin(), t.data.end(), a.mutable_data());
            return a;
        },
        py::arg("path"));
    m.def(
        "write_tensor",
        [](const std::string& path, const F32Array& a) {
            Tensor t;
            for (py::ssize_t i = 0; i < a.ndim(); ++i) {
                t.dims.push_back(static_cast<std::uint32_t>(a.shape(i)));
            }
            t.data.assign(a.data(), a.data() + a.size());
            kvedit::write_tensor(path, t);
        },
        py::arg("path"), py::arg("array"));
}
