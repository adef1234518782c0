// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvedit/harness.hpp"

#include "kvedit/error.hpp"
#include "kvedit/metrics.hpp"
#include "kvedit/parallel.hpp"
#include "kvedit/plot.hpp"
#include "kvedit/probe.hpp"
#include "kvedit/prominence.hpp"
#include "kvedit/report.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <ctime>
#include <mutex>

namespace kvedit {

namespace {

std::string now_utc() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string padded(int v, int width) {
    std::string s = std::to_string(v);
    return std::string(static_cast<size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
    return buf;
}

std::string required_string(const Json& inputs, const char* key, const std::string& command) {
    auto it = inputs.find(key);
    if (it == inputs.end() || !it->is_string() || it->get<std::string>().empty()) {
        fail(ErrorKind::usage, command + ": missing required input '" + key + "'");
    }
    return it->get<std::string>();
}

std::vector<int> required_ints(const Json& inputs, const char* key, const std::string& command) {
    auto it = inputs.find(key);
    if (it == inputs.end() || !it->is_array() || it->empty()) {
        fail(ErrorKind::usage, command + ": missing required input '" + key + "'");
    }
    try {
        return it->get<std::vector<int>>();
    } catch (const std::exception&) {
        fail(ErrorKind::usage, command + ": input '" + key + "' must be a list of integers");
    }
}

Json plan_json(const InjectionPlan& p) {
    return {
        {"mode", edit_mode_name(p.mode)},
        {"vital_layers", p.vital_layers},
        {"non_vital_layers", p.non_vital_layers},
        {"prominent_layer", p.prominent_layer},
        {"t_i", p.t_i},
        {"t_e", p.t_e},
        {"preserve_prompt", p.preserve_prompt},
        {"use_vital_for_non_rigid", p.use_vital_for_non_rigid},
    };
}

std::string sweep_name(const std::string& kind, int prompt, int layer) {
    return kind + "/p" + padded(prompt, 2) + (layer >= 0 ? "_l" + padded(layer, 2) : "") + ".tvlv";
}

void render_vitality(ExperimentDir& d, const VitalityReport& r) {
    d.text("vitality.svg",
           line_chart_svg("Layer vitality", "layer", "vitality",
                          {{"bypass", r.vitality_layer, "#1f77b4"}, {"rope drop", r.vitality_rope, "#d62728"}}),
           role::report);
    char note[48];
    if (r.pearson_r) {
        std::snprintf(note, sizeof(note), "r = %.3f", *r.pearson_r);
    } else {
        std::snprintf(note, sizeof(note), "r undefined");
    }
    d.text("correlation.svg",
           scatter_svg("Bypass vs RoPE vitality", "bypass vitality", "rope vitality", r.vitality_layer,
                       r.vitality_rope, note),
           role::report);
}

void render_prominence(ExperimentDir& d, const ProminenceReport& r) {
    d.text("prominence.svg",
           line_chart_svg("Layer prominence (selected " + std::to_string(r.selected_layer) + ")", "layer", "value",
                          {{"P", r.p, "#2ca02c"}, {"S_fg", r.s_fg, "#ff7f0e"}, {"S_bg", r.s_bg, "#1f77b4"}}),
           role::report);
}

/// One overlay PNG per captured step.
void render_attention(ExperimentDir& d, const Video& target, const std::map<int, GridMap>& maps, int patch) {
    for (const auto& [step, map] : maps) {
        int w = 0;
        int h = 0;
        const auto rgb = attention_overlay(target, map, patch, w, h);
        d.png("attention/overlay_step_" + padded(step, 2) + ".png", w, h, rgb, role::attention);
    }
}

std::map<int, GridMap> step_maps(const EditResult& r, int layer, const LatentGrid& grid) {
    std::map<int, GridMap> out;
    if (r.delta.empty()) {
        return out;
    }
    for (const auto& [step, att] : r.attention) {
        ForwardRecords rec;
        rec.attention[{layer, step}] = att;
        out[step] = accumulate_delta_attention(rec, r.delta, layer, {step}, grid);
    }
    return out;
}

Json write_edit(ExperimentDir& d, const EditResult& r, const InjectionPlan& plan, const Pipeline& pipe) {
    d.tensor("source/latent.tvlv", to_tensor(r.source_latent), role::original);
    d.tensor("source/video.tvlv", to_tensor(r.source_video), role::original);
    d.frames("source/frames", r.source_video, role::original);
    d.tensor("target/latent.tvlv", to_tensor(r.target_latent), role::edit);
    d.tensor("target/video.tvlv", to_tensor(r.target_video), role::edit);
    d.frames("target/frames", r.target_video, role::edit);

    Json report = {
        {"plan", plan_json(plan)},
        {"delta", to_json(r.delta)},
        {"divergence", r.divergence},
        {"warnings", r.warnings},
    };
    if (r.mask) {
        d.tensor("mask.tvlv", mask_tensor(*r.mask), role::mask);
        d.tensor("attention/accumulated.tvlv", map_tensor(r.mask->raw), role::attention);
        report["mask"] = to_json(*r.mask);
    }
    const auto maps = step_maps(r, plan.prominent_layer, pipe.model().config().latent_grid);
    std::vector<int> steps;
    for (const auto& [step, map] : maps) {
        d.tensor("attention/step_" + padded(step, 2) + ".tvlv", map_tensor(map), role::attention);
        steps.push_back(step);
    }
    render_attention(d, r.target_video, maps, pipe.decoder().config().patch);
    report["attention_steps"] = steps;
    return report;
}

Video load_video_input(const fs::path& path) {
    require(fs::exists(path), ErrorKind::io, path.string() + ": no such file or directory");
    if (fs::is_directory(path)) {
        return load_frames(path);
    }
    return video_from_tensor(read_tensor(path));
}

RegionMask region_from_mask(const Tensor& t, int patch) {
    require(t.dims.size() == 3, ErrorKind::format, "mask tensor must be [F, H, W]");
    const int f = static_cast<int>(t.dims[0]);
    const int h = static_cast<int>(t.dims[1]);
    const int w = static_cast<int>(t.dims[2]);
    RegionMask m(f, h * patch, w * patch);
    for (int i = 0; i < f; ++i) {
        for (int y = 0; y < h * patch; ++y) {
            for (int x = 0; x < w * patch; ++x) {
                m.at(i, y, x) = t.data[(static_cast<size_t>(i) * h + y / patch) * w + x / patch] > 0.5f ? 1 : 0;
            }
        }
    }
    return m;
}

void save_sweep_probes(ExperimentDir& d, const ProbeSweep& sweep, const std::string& kind) {
    for (size_t p = 0; p < sweep.probes.size(); ++p) {
        for (int l = 0; l < sweep.num_layers; ++l) {
            if (const auto& v = sweep.probes[p][static_cast<size_t>(l)]) {
                d.tensor(sweep_name(kind, static_cast<int>(p), l), to_tensor(*v), role::probe);
            }
        }
    }
}

void save_originals(ExperimentDir& d, const std::vector<Video>& originals) {
    for (size_t p = 0; p < originals.size(); ++p) {
        d.tensor(sweep_name("originals", static_cast<int>(p), -1), to_tensor(originals[p]), role::original);
    }
}

// --- commands ---------------------------------------------------------------

Json cmd_generate(ExperimentDir& d, const CommandRequest& rq) {
    const auto prompt = required_string(rq.inputs, "prompt", rq.command);
    const Pipeline pipe = rq.config.pipeline();
    const auto res = sample(pipe, prompt, rq.config.seed);
    d.tensor("latent.tvlv", to_tensor(res.latent), role::original);
    d.tensor("video.tvlv", to_tensor(res.video), role::original);
    d.frames("frames", res.video, role::original);
    const auto emb = pipe.text().embed(prompt);
    Json report = {
        {"prompt", prompt},
        {"seed", rq.config.seed},
        {"model_checksum", hex64(pipe.model().checksum())},
        {"tokens", emb.tokens},
        {"truncated", emb.truncated},
    };
    d.json("generate.json", report, role::report);
    return report;
}

Json cmd_probe_vitality(ExperimentDir& d, const CommandRequest& rq) {
    const auto& cfg = rq.config;
    const Pipeline pipe = cfg.pipeline();
    const PromptSet prompts = PromptSet::bundled(cfg.probe.n_p, cfg.seed);
    const auto bypass = run_probe_sweep(pipe, ProbeMode::bypass, prompts, cfg.workers);
    const auto rope = run_probe_sweep(pipe, ProbeMode::rope_drop, prompts, cfg.workers);
    save_originals(d, rope.originals);
    save_sweep_probes(d, bypass, "bypass");
    save_sweep_probes(d, rope, "rope");

    Json report = {{"prompts", prompts.prompts}, {"seeds", prompts.seeds}};
    Json failures = to_json(bypass.failures);
    for (auto& f : to_json(rope.failures)) {
        failures.push_back(f);
    }
    report["failures"] = failures;
    if (!failures.empty()) {
        d.json("vitality.json", report, role::report);
        fail(ErrorKind::missing_data, "probe-vitality: " + std::to_string(failures.size()) +
                                          " sweep cell(s) failed; see vitality.json");
    }
    const auto vit = build_vitality_report(bypass, rope, ToyPerceptualEmbedder());
    report.update(to_json(vit));
    report["vital_layers"] = select_vital_layers(vit, LayerSelection::top(cfg.probe.top_k));
    report["non_vital_layers"] = select_non_vital_layers(vit, LayerSelection::top(cfg.probe.top_k));
    d.json("vitality.json", report, role::report);
    render_vitality(d, vit);
    return report;
}

Json cmd_probe_prominence(ExperimentDir& d, const CommandRequest& rq) {
    const auto& cfg = rq.config;
    std::vector<std::string> prompts;
    std::vector<Video> originals;
    std::vector<std::vector<std::optional<Video>>> probes;
    if (rq.inputs.contains("from")) {
        const fs::path from = required_string(rq.inputs, "from", rq.command);
        const Manifest m = Manifest::load(from);
        require(m.command == "probe-vitality", ErrorKind::config,
                "probe-prominence: " + from.string() + " is a '" + m.command + "' run, not probe-vitality");
        const auto problems = verify_manifest(from);
        require(problems.empty(), ErrorKind::format,
                "probe-prominence: " + from.string() + ": " + (problems.empty() ? "" : problems.front()));
        prompts = read_json(from / "vitality.json").at("prompts").get<std::vector<std::string>>();
        const int layers = m.config.at("model").at("num_layers").get<int>();
        for (size_t p = 0; p < prompts.size(); ++p) {
            originals.push_back(video_from_tensor(read_tensor(from / sweep_name("originals", static_cast<int>(p), -1))));
            auto& row = probes.emplace_back(static_cast<size_t>(layers));
            for (int l = 0; l < layers; ++l) {
                const fs::path f = from / sweep_name("rope", static_cast<int>(p), l);
                if (fs::exists(f)) {
                    row[static_cast<size_t>(l)] = video_from_tensor(read_tensor(f));
                }
            }
        }
    } else {
        const Pipeline pipe = cfg.pipeline();
        const PromptSet set = PromptSet::bundled(cfg.probe.n_p, cfg.seed);
        auto rope = run_probe_sweep(pipe, ProbeMode::rope_drop, set, cfg.workers);
        save_originals(d, rope.originals);
        save_sweep_probes(d, rope, "rope");
        prompts = set.prompts;
        originals = std::move(rope.originals);
        probes = std::move(rope.probes);
    }
    const LuminanceMaskProvider provider(cfg.probe.luminance_k);
    for (size_t p = 0; p < originals.size(); ++p) {
        const RegionMask m = provider.mask(originals[p], prompts[p], static_cast<int>(p));
        Tensor t;
        t.dims = {static_cast<std::uint32_t>(m.frames), static_cast<std::uint32_t>(m.height),
                  static_cast<std::uint32_t>(m.width)};
        t.data.assign(m.fg.begin(), m.fg.end());
        d.tensor(sweep_name("masks", static_cast<int>(p), -1), t, role::mask);
    }
    const auto rep = build_prominence_report(originals, probes, prompts, provider,
                                             ProminenceOptions{cfg.probe.c, kPsnrCap, cfg.probe.per_prompt});
    Json report = to_json(rep);
    report["prompts"] = prompts;
    report["provider"] = provider.tag();
    d.json("prominence.json", report, role::report);
    render_prominence(d, rep);
    return report;
}

Json cmd_edit(ExperimentDir& d, const CommandRequest& rq, EditMode mode) {
    const auto src = required_string(rq.inputs, "src", rq.command);
    const auto trg = required_string(rq.inputs, "trg", rq.command);
    const Pipeline pipe = rq.config.pipeline();
    const InjectionPlan plan = rq.config.plan(mode);
    const EditResult r = mode == EditMode::object_addition
                             ? object_addition(pipe, src, trg, rq.config.seed, plan)
                             : non_rigid_edit(pipe, src, trg, rq.config.seed, plan);
    Json report = write_edit(d, r, plan, pipe);
    report["src"] = src;
    report["trg"] = trg;
    report["seed"] = rq.config.seed;
    d.json("edit.json", report, role::report);
    return report;
}

Json cmd_invert(ExperimentDir& d, const CommandRequest& rq) {
    const fs::path path = required_string(rq.inputs, "video", rq.command);
    const auto src = required_string(rq.inputs, "src", rq.command);
    const Pipeline pipe = rq.config.pipeline();
    const Video video = load_video_input(path);
    const auto& grid = pipe.model().config().latent_grid;
    require(video.frames == grid.frames && video.height == pipe.decoder().frame_height() &&
                video.width == pipe.decoder().frame_width(),
            ErrorKind::config,
            "invert: video is " + std::to_string(video.frames) + "x" + std::to_string(video.height) + "x" +
                std::to_string(video.width) + ", model expects " + std::to_string(grid.frames) + "x" +
                std::to_string(pipe.decoder().frame_height()) + "x" + std::to_string(pipe.decoder().frame_width()));
    d.tensor("input/video.tvlv", to_tensor(video), role::original);

    Json report = {{"src", src}, {"video", path.string()}};
    Video reconstruction;
    if (rq.inputs.contains("trg")) {
        const auto trg = required_string(rq.inputs, "trg", rq.command);
        const std::string mode_name = rq.inputs.value("mode", std::string("add"));
        require(mode_name == "add" || mode_name == "nonrigid", ErrorKind::usage,
                "invert: mode must be 'add' or 'nonrigid', got '" + mode_name + "'");
        const EditMode mode = mode_name == "add" ? EditMode::object_addition : EditMode::non_rigid;
        const InjectionPlan plan = rq.config.plan(mode);
        const RealEditResult rr = edit_real_video(pipe, video, src, trg, plan);
        d.tensor("inverted.tvlv", to_tensor(rr.inverted), role::original);
        report.update(write_edit(d, rr.edit, plan, pipe));
        report["trg"] = trg;
        reconstruction = rr.reconstruction;
    } else {
        const LatentVideo inverted = ddim_invert(pipe, video, src);
        d.tensor("inverted.tvlv", to_tensor(inverted), role::original);
        SampleOptions opt;
        opt.initial = inverted;
        reconstruction = sample(pipe, src, rq.config.seed, {}, opt).video;
        d.tensor("reconstruction/video.tvlv", to_tensor(reconstruction), role::edit);
        d.frames("reconstruction/frames", reconstruction, role::edit);
    }
    RegionMask all(video.frames, video.height, video.width);
    std::fill(all.fg.begin(), all.fg.end(), 1);
    report["reconstruction_psnr"] = psnr_region(video, reconstruction, all, Region::fg);
    d.json("invert.json", report, role::report);
    return report;
}

Json cmd_sweep(ExperimentDir& d, const CommandRequest& rq) {
    const auto target = required_string(rq.inputs, "target", rq.command);
    require(target == "edit-add" || target == "edit-nonrigid", ErrorKind::usage,
            "sweep: target must be edit-add or edit-nonrigid, got '" + target + "'");
    const auto src = required_string(rq.inputs, "src", rq.command);
    const auto trg = required_string(rq.inputs, "trg", rq.command);
    const auto t_e = required_ints(rq.inputs, "t_e", rq.command);
    const std::vector<int> t_i =
        target == "edit-add" ? required_ints(rq.inputs, "t_i", rq.command) : std::vector<int>{rq.config.edit.t_i};

    struct Cell {
        int t_i, t_e;
        std::string dir;
        std::string status;
        std::string error;
        std::string message;
    };
    std::vector<Cell> cells;
    for (int a : t_i) {
        for (int b : t_e) {
            const std::string dir = target == "edit-add" ? "ti" + padded(a, 2) + "_te" + padded(b, 2)
                                                         : "te" + padded(b, 2);
            cells.push_back({a, b, dir, "", "", ""});
        }
    }
    parallel_for(cells.size(), rq.config.workers, [&](size_t i) {
        Cell& c = cells[i];
        CommandRequest sub{target, rq.config, {{"src", src}, {"trg", trg}}, d.root() / c.dir};
        sub.config.edit.t_i = c.t_i;
        sub.config.edit.t_e = c.t_e;
        sub.config.workers = 1;
        try {
            run_command(sub);
            c.status = "ok";
        } catch (const Error& e) {
            c.status = "failed";
            c.error = std::string(error_kind_name(e.kind()));
            c.message = e.what();
        } catch (const std::exception& e) {
            c.status = "failed";
            c.error = "runtime-error";
            c.message = e.what();
        }
    });

    Json runs = Json::array();
    int failed = 0;
    for (const auto& c : cells) {
        Json r = {{"t_i", c.t_i}, {"t_e", c.t_e}, {"dir", c.dir}, {"status", c.status}};
        if (c.status != "ok") {
            r["error"] = c.error;
            r["message"] = c.message;
            ++failed;
        }
        runs.push_back(r);
    }

    // Grid of middle target frames: rows t_i, columns t_e; failed cells stay gray.
    const Pipeline pipe = rq.config.pipeline();
    const int fh = pipe.decoder().frame_height();
    const int fw = pipe.decoder().frame_width();
    const int gap = 2;
    const int rows = static_cast<int>(t_i.size());
    const int cols = static_cast<int>(t_e.size());
    const int width = cols * (fw + gap) + gap;
    const int height = rows * (fh + gap) + gap;
    std::vector<std::uint8_t> rgb(static_cast<size_t>(width) * height * 3, 255);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const Cell& cell = cells[static_cast<size_t>(r * cols + c)];
            std::optional<Video> v;
            if (cell.status == "ok") {
                v = video_from_tensor(read_tensor(d.root() / cell.dir / "target/video.tvlv"));
            }
            for (int y = 0; y < fh; ++y) {
                for (int x = 0; x < fw; ++x) {
                    const size_t at = ((static_cast<size_t>(gap + r * (fh + gap) + y)) * width + gap + c * (fw + gap) + x) * 3;
                    for (int ch = 0; ch < 3; ++ch) {
                        rgb[at + ch] = v ? static_cast<std::uint8_t>(std::lround(
                                               std::clamp(v->at(v->frames / 2, y, x, ch), 0.0f, 1.0f) * 255.0f))
                                         : 128;
                    }
                }
            }
        }
    }
    d.png("sweep.png", width, height, rgb, role::report);

    Json report = {{"target", target}, {"src", src}, {"trg", trg}, {"runs", runs}, {"failed", failed}};
    d.json("sweep.json", report, role::report);
    return report;
}

Json cmd_evaluate(ExperimentDir& d, const CommandRequest& rq) {
    auto it = rq.inputs.find("runs");
    require(it != rq.inputs.end() && it->is_array() && !it->empty(), ErrorKind::usage,
            "evaluate: missing required input 'runs'");
    struct Loaded {
        Video src, trg;
        std::string src_prompt, trg_prompt;
        std::optional<RegionMask> region;
    };
    std::vector<Loaded> loaded;
    for (const auto& r : *it) {
        const fs::path dir = r.get<std::string>();
        const Manifest m = Manifest::load(dir);
        require(fs::exists(dir / "target/video.tvlv"), ErrorKind::missing_data,
                "evaluate: " + dir.string() + " has no target video (a '" + m.command + "' run)");
        Loaded l;
        l.src = video_from_tensor(read_tensor(dir / "source/video.tvlv"));
        l.trg = video_from_tensor(read_tensor(dir / "target/video.tvlv"));
        l.src_prompt = m.inputs.value("src", std::string());
        l.trg_prompt = m.inputs.value("trg", std::string());
        if (fs::exists(dir / "mask.tvlv")) {
            l.region = region_from_mask(read_tensor(dir / "mask.tvlv"),
                                        m.config.at("decoder").at("patch").get<int>());
        }
        loaded.push_back(std::move(l));
    }
    std::vector<RunPair> pairs;
    for (const auto& l : loaded) {
        pairs.push_back({&l.src, &l.trg, l.src_prompt, l.trg_prompt, l.region ? &*l.region : nullptr});
    }
    const ToyClipEmbedder embedder;
    Json report = to_json(evaluate_runs(pairs, embedder));
    report["runs"] = *it;
    d.json("metrics.json", report, role::report);
    return report;
}

Json cmd_report(ExperimentDir& d, const CommandRequest& rq) {
    const fs::path run = required_string(rq.inputs, "run", rq.command);
    require(fs::is_directory(run), ErrorKind::io, run.string() + ": not a directory");
    Json summary = Json::object();
    if (fs::exists(run / "vitality.json")) {
        const auto r = vitality_from_json(read_json(run / "vitality.json"));
        render_vitality(d, r);
        summary["vitality"] = {{"layers", r.vitality_rope.size()}};
    }
    if (fs::exists(run / "prominence.json")) {
        const auto r = prominence_from_json(read_json(run / "prominence.json"));
        require(self_consistent(r), ErrorKind::format,
                "prominence report: stored S/P do not follow from the stored PSNRs");
        render_prominence(d, r);
        summary["prominence"] = {{"selected_layer", r.selected_layer}};
    }
    if (fs::exists(run / "edit.json")) {
        const Json e = read_json(run / "edit.json");
        require(e.contains("attention_steps"), ErrorKind::missing_data,
                "edit report is incomplete; missing: attention_steps");
        const Manifest m = Manifest::load(run);
        const Video target = video_from_tensor(read_tensor(run / "target/video.tvlv"));
        std::map<int, GridMap> maps;
        for (int step : e.at("attention_steps").get<std::vector<int>>()) {
            maps[step] = map_from_tensor(read_tensor(run / ("attention/step_" + padded(step, 2) + ".tvlv")));
        }
        render_attention(d, target, maps, m.config.at("decoder").at("patch").get<int>());
        summary["attention_overlays"] = maps.size();
    }
    if (fs::exists(run / "metrics.json")) {
        const auto r = metrics_from_json(read_json(run / "metrics.json"));
        summary["metrics"] = {{"overall", r.overall}, {"clip_all", r.clip_all}};
    }
    require(!summary.empty(), ErrorKind::missing_data,
            "report: " + run.string() + " holds no vitality, prominence, edit or metrics report");
    d.json("report.json", summary, role::report);
    return summary;
}

}  // namespace

// --- manifest -----------------------------------------------------------------

Json Manifest::to_json() const {
    Json arts = Json::array();
    for (const auto& a : artifacts) {
        arts.push_back({{"path", a.path}, {"sha256", a.sha256}, {"role", a.role}});
    }
    return {
        {"version", version}, {"id", id},         {"created_at", created_at}, {"command", command},
        {"config", config},   {"inputs", inputs}, {"artifacts", arts},
    };
}

Manifest Manifest::from_json(const Json& j) {
    Manifest m;
    try {
        m.version = j.at("version").get<int>();
        m.id = j.at("id").get<std::string>();
        m.created_at = j.at("created_at").get<std::string>();
        m.command = j.at("command").get<std::string>();
        m.config = j.at("config");
        m.inputs = j.at("inputs");
        for (const auto& a : j.at("artifacts")) {
            m.artifacts.push_back(
                {a.at("path").get<std::string>(), a.at("sha256").get<std::string>(), a.at("role").get<std::string>()});
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, std::string("manifest: ") + e.what());
    }
    require(m.version == kManifestVersion, ErrorKind::format,
            "manifest: unsupported version " + std::to_string(m.version));
    return m;
}

Manifest Manifest::load(const fs::path& dir) {
    return from_json(read_json(dir / "manifest.json"));
}

std::string experiment_id(std::string_view command, const Json& config, const Json& inputs) {
    const std::string blob = dump_json({{"command", command}, {"config", config}, {"inputs", inputs}});
    return sha256_hex({reinterpret_cast<const std::uint8_t*>(blob.data()), blob.size()}).substr(0, 16);
}

std::vector<std::string> verify_manifest(const fs::path& dir) {
    const Manifest m = Manifest::load(dir);
    std::vector<std::string> problems;
    for (const auto& a : m.artifacts) {
        const fs::path p = dir / a.path;
        if (!fs::exists(p)) {
            problems.push_back(a.path + ": missing");
        } else if (sha256_file(p) != a.sha256) {
            problems.push_back(a.path + ": checksum mismatch");
        }
    }
    return problems;
}

ExperimentDir::ExperimentDir(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    require(!ec, ErrorKind::io, root_.string() + ": cannot create directory: " + ec.message());
}

void ExperimentDir::add(const std::string& rel, const char* r) {
    artifacts_.push_back({rel, sha256_file(root_ / rel), r});
}

void ExperimentDir::tensor(const std::string& rel, const Tensor& t, const char* r) {
    write_tensor(root_ / rel, t);
    add(rel, r);
}

void ExperimentDir::frames(const std::string& rel_dir, const Video& video, const char* r) {
    for (const auto& name : dump_frames(root_ / rel_dir, video)) {
        add(rel_dir + "/" + name, r);
    }
}

void ExperimentDir::json(const std::string& rel, const Json& j, const char* r) {
    write_json(root_ / rel, j);
    add(rel, r);
}

void ExperimentDir::text(const std::string& rel, std::string_view s, const char* r) {
    write_text(root_ / rel, s);
    add(rel, r);
}

void ExperimentDir::png(const std::string& rel, int width, int height, std::span<const std::uint8_t> rgb,
                        const char* r) {
    write_png(root_ / rel, width, height, rgb);
    add(rel, r);
}

Manifest ExperimentDir::finish(const std::string& command, const Json& config, const Json& inputs) const {
    Manifest m;
    m.id = experiment_id(command, config, inputs);
    m.created_at = now_utc();
    m.command = command;
    m.config = config;
    m.inputs = inputs;
    m.artifacts = artifacts_;
    std::sort(m.artifacts.begin(), m.artifacts.end(),
              [](const Artifact& a, const Artifact& b) { return a.path < b.path; });
    write_json(root_ / "manifest.json", m.to_json());
    return m;
}

// --- dispatch -----------------------------------------------------------------

CommandResult run_command(const CommandRequest& rq) {
    const auto& names = command_names();
    require(std::find(names.begin(), names.end(), rq.command) != names.end(), ErrorKind::usage,
            "unknown command '" + rq.command + "'");
    rq.config.validate();
    const Json config = rq.config.to_json();
    const std::string id = experiment_id(rq.command, config, rq.inputs);
    const fs::path out = rq.out.empty() ? fs::path("runs") / (rq.command + "-" + id) : rq.out;
    ExperimentDir d(out);

    CommandResult result;
    result.dir = out;
    const auto& c = rq.command;
    try {
        if (c == "generate") {
            result.summary = cmd_generate(d, rq);
        } else if (c == "probe-vitality") {
            result.summary = cmd_probe_vitality(d, rq);
        } else if (c == "probe-prominence") {
            result.summary = cmd_probe_prominence(d, rq);
        } else if (c == "edit-add") {
            result.summary = cmd_edit(d, rq, EditMode::object_addition);
        } else if (c == "edit-nonrigid") {
            result.summary = cmd_edit(d, rq, EditMode::non_rigid);
        } else if (c == "invert") {
            result.summary = cmd_invert(d, rq);
        } else if (c == "sweep") {
            result.summary = cmd_sweep(d, rq);
        } else if (c == "evaluate") {
            result.summary = cmd_evaluate(d, rq);
        } else {
            result.summary = cmd_report(d, rq);
        }
    } catch (...) {
        // Keep whatever was written indexed, so a failed run is still inspectable.
        d.finish(rq.command, config, rq.inputs);
        throw;
    }
    result.manifest = d.finish(rq.command, config, rq.inputs);
    return result;
}

CommandResult rerun(const fs::path& manifest_dir, const fs::path& out) {
    const Manifest m = Manifest::load(manifest_dir);
    return run_command({m.command, ExperimentConfig::from_json(m.config), m.inputs, out});
}

}  // namespace kvedit
