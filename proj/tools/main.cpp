// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

// kvedit: command-line front end for the experiment harness.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 configuration or
// specification error. Failures print one line to stderr:
//   error: <class>: <message>

#include "kvedit/error.hpp"
#include "kvedit/harness.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <optional>

namespace {

using kvedit::ErrorKind;
using kvedit::Json;

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string t_i;
    std::string t_e;
    std::optional<double> t_mask;
    std::string layers;
    std::string out;
    std::optional<int> n_p;
    std::optional<int> steps;
    std::optional<int> workers;

    // command inputs
    std::string prompt, src, trg, from, video, mode, target;
    std::vector<std::string> runs;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "Config JSON, or a manifest.json to re-run");
    cmd->add_option("--seed", f.seed, "Sampling seed");
    cmd->add_option("--t-i", f.t_i, "Injection/mask step T_i (comma list for sweep)");
    cmd->add_option("--t-e", f.t_e, "Injection end step T_e (comma list for sweep)");
    cmd->add_option("--t-mask", f.t_mask, "Mask binarization threshold");
    cmd->add_option("--layers", f.layers, "Injection layers, comma list (vital for edit-add, non-vital for edit-nonrigid)");
    cmd->add_option("--out", f.out, "Experiment directory (default runs/<command>-<id>)");
    cmd->add_option("--n-p", f.n_p, "Number of probe prompts");
    cmd->add_option("--steps", f.steps, "Denoising steps T");
    cmd->add_option("--workers", f.workers, "Concurrent workers for sweeps");
}

int single(const std::string& text, const char* flag) {
    const auto v = kvedit::parse_int_list(text);
    kvedit::require(v.size() == 1, ErrorKind::usage, std::string(flag) + " takes one integer outside sweep");
    return v.front();
}

kvedit::CommandRequest build_request(const std::string& command, const Flags& f) {
    kvedit::CommandRequest rq;
    rq.command = command;
    if (!f.config.empty()) {
        const Json j = kvedit::read_json(f.config);
        if (j.is_object() && j.contains("artifacts") && j.contains("config")) {
            const auto m = kvedit::Manifest::from_json(j);
            rq.config = kvedit::ExperimentConfig::from_json(m.config);
            if (m.command == command) {
                rq.inputs = m.inputs;
            }
        } else {
            rq.config = kvedit::ExperimentConfig::from_json(j);
        }
    }
    auto& c = rq.config;
    if (f.seed) c.seed = *f.seed;
    if (f.t_mask) c.edit.t_mask = *f.t_mask;
    if (f.n_p) c.probe.n_p = *f.n_p;
    if (f.steps) c.schedule.steps = *f.steps;
    if (f.workers) c.workers = *f.workers;
    if (!f.layers.empty()) {
        const auto layers = kvedit::parse_int_list(f.layers);
        if (command == "edit-nonrigid" || (command == "sweep" && f.target == "edit-nonrigid")) {
            c.edit.non_vital_layers = layers;
        } else {
            c.edit.vital_layers = layers;
        }
    }
    auto& in = rq.inputs;
    if (command == "sweep") {
        if (!f.t_i.empty()) in["t_i"] = kvedit::parse_int_list(f.t_i);
        if (!f.t_e.empty()) in["t_e"] = kvedit::parse_int_list(f.t_e);
    } else {
        if (!f.t_i.empty()) c.edit.t_i = single(f.t_i, "--t-i");
        if (!f.t_e.empty()) c.edit.t_e = single(f.t_e, "--t-e");
    }
    auto set = [&](const char* key, const std::string& v) {
        if (!v.empty()) in[key] = v;
    };
    set("prompt", f.prompt);
    set("src", f.src);
    set("trg", f.trg);
    set("mode", f.mode);
    set("target", f.target);
    if (!f.from.empty()) in["from"] = kvedit::fs::absolute(f.from).lexically_normal().string();
    if (!f.video.empty()) in["video"] = kvedit::fs::absolute(f.video).lexically_normal().string();
    if (!f.runs.empty()) {
        if (command == "report") {
            kvedit::require(f.runs.size() == 1, ErrorKind::usage, "report takes one --run");
            in["run"] = kvedit::fs::absolute(f.runs.front()).lexically_normal().string();
        } else {
            Json list = Json::array();
            for (const auto& r : f.runs) {
                list.push_back(kvedit::fs::absolute(r).lexically_normal().string());
            }
            in["runs"] = list;
        }
    }
    rq.out = f.out;
    return rq;
}

int report_error(std::string_view cls, std::string message, int code) {
    for (char& ch : message) {
        if (ch == '\n' || ch == '\r') ch = ' ';
    }
    std::cerr << "error: " << cls << ": " << message << "\n";
    return code;
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::usage: return 2;
        case ErrorKind::config:
        case ErrorKind::spec: return 3;
        default: return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kvedit: training-free text-to-video editing by key/value injection"};
    app.set_version_flag("--version", "kvedit 0.1.0");
    app.require_subcommand(1, 1);
    Flags f;

    auto* generate = app.add_subcommand("generate", "Sample one video from a prompt");
    generate->add_option("--prompt", f.prompt, "Text prompt");

    app.add_subcommand("probe-vitality", "Bypass and RoPE-drop sweeps with layer vitality");

    auto* prominence = app.add_subcommand("probe-prominence", "Layer prominence from a RoPE-drop sweep");
    prominence->add_option("--from", f.from, "probe-vitality experiment directory to reuse");

    auto* add = app.add_subcommand("edit-add", "Object addition");
    auto* nonrigid = app.add_subcommand("edit-nonrigid", "Non-rigid editing");
    for (auto* cmd : {add, nonrigid}) {
        cmd->add_option("--src", f.src, "Source prompt");
        cmd->add_option("--trg", f.trg, "Target prompt");
    }

    auto* invert = app.add_subcommand("invert", "DDIM inversion of a video, optionally followed by an edit");
    invert->add_option("--video", f.video, "Frame directory (0000.png ...) or .tvlv tensor");
    invert->add_option("--src", f.src, "Prompt describing the video");
    invert->add_option("--trg", f.trg, "Target prompt; edits after inverting");
    invert->add_option("--mode", f.mode, "Edit mode for --trg")->check(CLI::IsMember({"add", "nonrigid"}));

    auto* sweep = app.add_subcommand("sweep", "Grid over T_i x T_e, one sub-run per combination");
    sweep->add_option("target", f.target, "edit-add or edit-nonrigid")
        ->check(CLI::IsMember({"edit-add", "edit-nonrigid"}));
    sweep->add_option("--src", f.src, "Source prompt");
    sweep->add_option("--trg", f.trg, "Target prompt");

    auto* evaluate = app.add_subcommand("evaluate", "Editing metrics over edit directories");
    evaluate->add_option("--run", f.runs, "Edit experiment directory (repeatable)");

    auto* report = app.add_subcommand("report", "Re-render plots from an experiment directory");
    report->add_option("--run", f.runs, "Experiment directory");

    // Inputs may also come from a manifest passed as --config, so the harness,
    // not the parser, reports missing ones.
    for (auto* cmd : app.get_subcommands({})) {
        add_common(cmd, f);
    }

    if (argc > 1 && argv[1][0] != '-') {
        const auto& names = kvedit::command_names();
        if (std::find(names.begin(), names.end(), argv[1]) == names.end()) {
            return report_error("usage-error", std::string("unknown command '") + argv[1] + "'", 2);
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help, --version
    } catch (const CLI::ParseError& e) {
        return report_error("usage-error", e.what(), 2);
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        const auto result = kvedit::run_command(build_request(command, f));
        std::cout << command << " " << result.manifest.id << " " << result.dir.string() << "\n";
        return 0;
    } catch (const kvedit::Error& e) {
        return report_error(kvedit::error_kind_name(e.kind()), e.what(), exit_code(e.kind()));
    } catch (const std::exception& e) {
        return report_error("runtime-error", e.what(), 1);
    }
}
