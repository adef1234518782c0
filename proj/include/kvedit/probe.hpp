// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kvedit/sampler.hpp"

#include <optional>
#include <string>
#include <vector>

namespace kvedit {

enum class ProbeMode { bypass, rope_drop };

std::string_view probe_mode_name(ProbeMode mode);

struct PromptSet {
    std::vector<std::string> prompts;
    std::vector<std::uint64_t> seeds;

    size_t size() const { return prompts.size(); }
    /// Non-empty, unique prompts, one seed per prompt.
    void validate() const;

    /// First n prompts of the bundled list, seeded from base_seed.
    static PromptSet bundled(int n, std::uint64_t base_seed = 0);
};

/// The static list of diverse scene prompts shipped with the tool.
const std::vector<std::string>& bundled_prompts();

/// Video -> unit-norm feature vector.
class PerceptualEmbedder {
public:
    virtual ~PerceptualEmbedder() = default;
    virtual std::vector<double> embed(const Video& video) const = 0;
    virtual std::string tag() const = 0;
};

/// Per-frame 8x8 zero-mean luminance grid plus centered channel means, averaged
/// over frames and L2-normalized.
class ToyPerceptualEmbedder final : public PerceptualEmbedder {
public:
    explicit ToyPerceptualEmbedder(int grid = 8) : grid_(grid) {}
    std::vector<double> embed(const Video& video) const override;
    std::string tag() const override;

private:
    int grid_;
};

/// Cosine similarity; a zero vector on either side yields 0.
double cosine(std::span<const double> a, std::span<const double> b);

struct ProbeFailure {
    int prompt = -1;
    int layer = -1;  // -1: the unmodified original
    std::string message;
};

struct ProbeSweep {
    ProbeMode mode = ProbeMode::bypass;
    int num_layers = 0;
    std::vector<Video> originals;                          // per prompt
    std::vector<std::vector<std::optional<Video>>> probes;  // [prompt][layer]
    std::vector<ProbeFailure> failures;

    size_t video_count() const;
};

/// For every prompt: the unmodified video plus one probing video per layer with
/// that layer bypassed (or its key RoPE dropped). Failures are recorded, not thrown.
ProbeSweep run_probe_sweep(const Pipeline& pipe, ProbeMode mode, const PromptSet& prompts, int workers = 1);

/// vitality(l) = 1 - mean_s cos(embed(V_o), embed(V_l)). Throws missing_data
/// naming every absent (prompt, layer) probe.
std::vector<double> vitality_score(const std::vector<Video>& originals,
                                   const std::vector<std::vector<std::optional<Video>>>& probes,
                                   const PerceptualEmbedder& embedder);

/// Sample Pearson correlation.
double pearson(std::span<const double> x, std::span<const double> y);

struct VitalityReport {
    std::vector<double> vitality_layer;  // bypass
    std::vector<double> vitality_rope;
    std::optional<double> pearson_r;     // absent when either curve is constant
    int n_prompts = 0;
    std::string embedder;
};

VitalityReport build_vitality_report(const ProbeSweep& bypass, const ProbeSweep& rope,
                                     const PerceptualEmbedder& embedder);

struct LayerSelection {
    enum class Kind { explicit_list, top_k, threshold };
    Kind kind = Kind::top_k;
    std::vector<int> layers;  // explicit_list
    int k = 3;                // top_k
    double threshold = 0.0;   // threshold

    static LayerSelection explicit_list(std::vector<int> l) { return {Kind::explicit_list, std::move(l), 0, 0.0}; }
    static LayerSelection top(int k) { return {Kind::top_k, {}, k, 0.0}; }
    static LayerSelection above(double t) { return {Kind::threshold, {}, 0, t}; }
};

/// Vital layers by RoPE vitality; sorted ascending, ties broken toward lower index.
std::vector<int> select_vital_layers(const VitalityReport& report, const LayerSelection& selection);
/// Mirror image: lowest RoPE vitality (bottom-k, or strictly below threshold).
std::vector<int> select_non_vital_layers(const VitalityReport& report, const LayerSelection& selection);

/// Layer lists used with the 42-layer backbone.
const std::vector<int>& backbone_vital_layers();
const std::vector<int>& backbone_non_vital_layers();
inline constexpr int kBackboneLayers = 42;
inline constexpr int kBackboneProminentLayer = 11;

}  // namespace kvedit
