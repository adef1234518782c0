// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kvedit/tensor.hpp"
#include "kvedit/video.hpp"

#include <array>
#include <compare>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <vector>

namespace kvedit {

struct ModelConfig {
    int num_layers = 8;
    int num_heads = 4;
    int head_dim = 16;
    int model_dim = 64;
    int mlp_dim = 128;
    int text_len = 16;
    int text_embed_dim = 32;
    LatentGrid latent_grid{};
    int channel_dim = 8;
    std::uint64_t init_seed = 0;
    double rope_theta = 10000.0;
    int train_timesteps = 1000;
    double beta_start = 0.00085;
    double beta_end = 0.012;
    /// Mean logit bias from visual queries to text keys. Stands in for the text
    /// conditioning strength a trained backbone would have; 0 disables it.
    double text_bias = 3.0;
    /// Layers built without rotary embedding (content-only attention). Used to
    /// plant known position-agnostic layers for probe testing.
    std::set<int> rope_free_layers;

    int visual_tokens() const { return latent_grid.tokens(); }
    int total_tokens() const { return text_len + visual_tokens(); }
    int attn_dim() const { return num_heads * head_dim; }

    /// Throws ErrorKind::config on any violated invariant.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

/// Number of rotary pairs assigned to the (frame, height, width) axes.
/// Pairs are split as evenly as possible; the remainder goes to the frame axis.
std::array<int, 3> rope_axis_pairs(int head_dim);

/// Precomputed rotary angles for a fixed set of positions.
class RopeTable {
public:
    RopeTable(std::span<const Position3> positions, int head_dim, double theta);

    /// Rotates every head of every row in place. x is [tokens x heads*head_dim].
    void apply(Matrix& x, int heads) const;

    int tokens() const { return tokens_; }
    int head_dim() const { return head_dim_; }

private:
    int tokens_;
    int head_dim_;
    std::vector<float> cos_;  // [tokens x head_dim/2]
    std::vector<float> sin_;
};

/// Axis-partitioned rotary embedding of x ([tokens x heads*head_dim]).
Matrix apply_rope(const Matrix& x, int heads, int head_dim, std::span<const Position3> positions,
                  double theta = 10000.0);

/// Visual keys/values of one layer at one step, recorded before rotary embedding.
struct KVPack {
    Matrix keys;    // [visual_tokens x heads*head_dim]
    Matrix values;  // [visual_tokens x heads*head_dim]
    int layer = -1;
    int timestep = -1;
};

/// Per-visual-token blend weight, canonical token order.
using TokenMask = std::vector<float>;

struct KvInjection {
    std::shared_ptr<const KVPack> source;
    /// Absent: full replacement by the source.
    std::shared_ptr<const TokenMask> mask;
};

struct LayerHooks {
    bool bypass = false;
    bool rope_drop_key = false;
    bool capture_kv = false;
    bool capture_attention = false;
    bool block_text_to_visual = false;
    std::optional<KvInjection> inject;

    bool capture_only() const { return !bypass && !rope_drop_key && !block_text_to_visual && !inject; }
};

using HookMap = std::map<int, LayerHooks>;

/// Head-averaged joint attention, rows = queries, columns = keys, text tokens first.
struct AttentionMap {
    Matrix weights;  // [total_tokens x total_tokens]
    int layer = -1;
    int timestep = -1;
    int text_len = 0;
};

struct LayerStep {
    int layer = 0;
    int step = 0;
    auto operator<=>(const LayerStep&) const = default;
};

struct ForwardRecords {
    std::map<LayerStep, std::shared_ptr<const KVPack>> kv;
    std::map<LayerStep, std::shared_ptr<const AttentionMap>> attention;

    void merge(const ForwardRecords& other);
    bool empty() const { return kv.empty() && attention.empty(); }
};

/// Step index in the denoising loop and the training timestep it conditions on.
struct StepInfo {
    int index = 0;
    int train_t = 0;
};

/// Joint token state: text rows first, then visual rows in grid order.
struct TokenSequence {
    Matrix tokens;
    int text_len = 0;

    auto text() { return tokens.topRows(text_len); }
    auto visual() { return tokens.bottomRows(tokens.rows() - text_len); }
    auto text() const { return tokens.topRows(text_len); }
    auto visual() const { return tokens.bottomRows(tokens.rows() - text_len); }
};

struct LayerWeights {
    Matrix wq, wk, wv, wo;  // [D x A], [D x A], [D x A], [A x D]
    Vector bq, bk;          // shared query/key offsets; give rotary layers a relative-position preference
    Matrix w1, w2;          // MLP [D x M], [M x D]
    float logit_scale = 1.0f;
    float attn_gain = 1.0f;
    float text_bias = 0.0f;
    bool rope_free = false;
};

struct ModelWeights {
    Matrix w_in;    // [channels x D]
    Matrix w_txt;   // [text_embed_dim x D]
    Matrix w_time;  // [D x D], applied to the sinusoidal timestep code
    Matrix w_out;   // [D x channels]
    std::vector<LayerWeights> layers;
};

struct LayerOutput {
    std::shared_ptr<const KVPack> kv;
    std::shared_ptr<const AttentionMap> attention;
};

struct ForwardResult {
    LatentVideo noise_prediction;
    ForwardRecords records;
};

/// Deterministic, hookable toy diffusion transformer with joint text/visual
/// self-attention and rotary embedding on visual queries/keys. Immutable after
/// construction and safe to share across threads.
class Model {
public:
    explicit Model(ModelConfig config);

    const ModelConfig& config() const { return config_; }
    const ModelWeights& weights() const { return weights_; }
    const std::vector<Position3>& positions() const { return positions_; }
    const RopeTable& rope() const { return rope_; }

    /// Cumulative signal level (alpha-bar) of a training timestep.
    double signal_level(int train_t) const;
    /// FNV-1a over all weight bytes.
    std::uint64_t checksum() const;

    /// Sinusoidal timestep code, [1 x D].
    Vector timestep_code(int train_t) const;

    TokenSequence embed_inputs(const LatentVideo& latents, const Matrix& prompt_rows, int train_t) const;

    /// One transformer block with hooks applied. Modifies tokens in place.
    LayerOutput attention_forward(TokenSequence& tokens, int layer, const LayerHooks& hooks, StepInfo step) const;

    /// Final norm and head: clean-latent estimate for the visual rows.
    Matrix predict_clean(const TokenSequence& tokens) const;

    /// Full forward. The head estimates the clean latent; it is returned as a
    /// noise prediction through the signal level of step.train_t.
    ForwardResult forward(const LatentVideo& latents, const Matrix& prompt_rows, StepInfo step,
                          const HookMap& hooks = {}) const;

private:
    ModelConfig config_;
    ModelWeights weights_;
    std::vector<Position3> positions_;
    RopeTable rope_;
    std::vector<double> alpha_bar_;
};

/// Row-wise layer norm without affine parameters.
Matrix layer_norm(const Matrix& x, float eps = 1e-5f);

/// target <- M * target + (1 - M) * source per row; a null mask copies source.
void blend_rows(Eigen::Ref<Matrix> target, const Matrix& source, const TokenMask* mask);

void validate_hooks(const ModelConfig& config, const HookMap& hooks);

}  // namespace kvedit
