// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kvedit/edit.hpp"
#include "kvedit/io.hpp"
#include "kvedit/sampler.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace kvedit {

/// Editing hyperparameters. Layer lists and the prominent layer fall back to the
/// backbone lists for 42-layer models and the measured toy lists otherwise.
struct EditConfig {
    int t_i = 10;
    int t_e = 25;
    double t_mask = 0.8;
    double k = 10.0;
    double c_k = 0.1;
    int blur_kernel = 3;
    double blur_sigma = 1.0;
    int mask_window = 3;
    bool preserve_prompt = true;
    bool use_vital_for_non_rigid = false;
    std::optional<std::vector<int>> vital_layers;
    std::optional<std::vector<int>> non_vital_layers;
    std::optional<int> prominent_layer;
};

struct ProbeConfig {
    int n_p = 40;
    double c = 400.0;
    bool per_prompt = false;
    int top_k = 3;
    double luminance_k = 0.5;
};

struct ExperimentConfig {
    ModelConfig model;
    DenoiseSchedule schedule;
    DecoderConfig decoder;
    EditConfig edit;
    ProbeConfig probe;
    std::uint64_t seed = 0;
    int workers = 1;

    /// Resolved plan for a mode (defaults filled in, not yet validated).
    InjectionPlan plan(EditMode mode) const;
    Pipeline pipeline() const;
    /// Throws ErrorKind::config on any invalid value.
    void validate() const;

    Json to_json() const;
    /// Unknown keys and mistyped values raise ErrorKind::config naming the key.
    static ExperimentConfig from_json(const Json& j);
};

/// Comma-separated integers, e.g. "0,5,10". Throws ErrorKind::usage.
std::vector<int> parse_int_list(std::string_view text);

}  // namespace kvedit
