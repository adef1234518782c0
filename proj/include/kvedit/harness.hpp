// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kvedit/config.hpp"
#include "kvedit/io.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace kvedit {

inline constexpr int kManifestVersion = 1;

/// Artifact roles recorded in a manifest.
namespace role {
inline constexpr const char* original = "original";
inline constexpr const char* probe = "probe";
inline constexpr const char* edit = "edit";
inline constexpr const char* mask = "mask";
inline constexpr const char* attention = "attention";
inline constexpr const char* report = "report";
}  // namespace role

struct Artifact {
    std::string path;  // relative to the experiment directory, '/' separated
    std::string sha256;
    std::string role;
};

struct Manifest {
    int version = kManifestVersion;
    std::string id;
    std::string created_at;
    std::string command;
    Json config;  // full resolved ExperimentConfig
    Json inputs;  // command inputs (prompts, paths, sweep lists)
    std::vector<Artifact> artifacts;

    Json to_json() const;
    static Manifest from_json(const Json& j);
    static Manifest load(const fs::path& dir);
};

/// Hash of (command, config, inputs); stable across runs.
std::string experiment_id(std::string_view command, const Json& config, const Json& inputs);

/// Problems found re-checking every artifact of a directory; empty when intact.
std::vector<std::string> verify_manifest(const fs::path& dir);

/// Writes artifacts under one root and keeps the index for the manifest.
class ExperimentDir {
public:
    explicit ExperimentDir(fs::path root);

    const fs::path& root() const { return root_; }
    const std::vector<Artifact>& artifacts() const { return artifacts_; }

    void tensor(const std::string& rel, const Tensor& t, const char* role);
    void frames(const std::string& rel_dir, const Video& video, const char* role);
    void json(const std::string& rel, const Json& j, const char* role);
    void text(const std::string& rel, std::string_view s, const char* role);
    void png(const std::string& rel, int width, int height, std::span<const std::uint8_t> rgb, const char* role);

    /// Writes manifest.json and returns it.
    Manifest finish(const std::string& command, const Json& config, const Json& inputs) const;

private:
    void add(const std::string& rel, const char* role);

    fs::path root_;
    std::vector<Artifact> artifacts_;
};

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"generate",      "probe-vitality", "probe-prominence",
                                                   "edit-add",      "edit-nonrigid",  "invert",
                                                   "sweep",         "evaluate",       "report"};
    return names;
}

/// One harness invocation. Inputs by command:
///   generate          prompt
///   probe-vitality    (none; prompts come from probe.n_p)
///   probe-prominence  from (optional probe-vitality directory)
///   edit-add          src, trg
///   edit-nonrigid     src, trg
///   invert            video (frame directory or .tvlv), src; optional trg, mode ("add" | "nonrigid")
///   sweep             target ("edit-add" | "edit-nonrigid"), src, trg, t_i (list), t_e (list)
///   evaluate          runs (list of edit directories)
///   report            run (any experiment directory)
struct CommandRequest {
    std::string command;
    ExperimentConfig config;
    Json inputs = Json::object();
    fs::path out;  // empty: runs/<command>-<id>
};

struct CommandResult {
    fs::path dir;
    Manifest manifest;
    Json summary;
};

/// Runs a command to completion; throws kvedit::Error on failure.
CommandResult run_command(const CommandRequest& request);

/// Re-runs the experiment recorded in `manifest_dir` into `out`.
CommandResult rerun(const fs::path& manifest_dir, const fs::path& out);

}  // namespace kvedit
