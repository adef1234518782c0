// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvedit/model.hpp"

#include "kvedit/error.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <string>

namespace kvedit {

namespace {

std::string shape_str(const Matrix& m) {
    return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

void hash_matrix(std::uint64_t& hash, const Matrix& m) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    for (Eigen::Index i = 0; i < m.size() * static_cast<Eigen::Index>(sizeof(float)); ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
}

void hash_float(std::uint64_t& hash, float v) {
    unsigned char bytes[sizeof(float)];
    std::memcpy(bytes, &v, sizeof(float));
    for (unsigned char b : bytes) {
        hash ^= b;
        hash *= 0x100000001b3ULL;
    }
}

Matrix gelu(const Matrix& x) {
    const auto a = x.array();
    return (0.5f * a * (1.0f + (0.7978845608f * (a + 0.044715f * a.cube())).tanh())).matrix();
}

// Replaces rows of `target` by M*target + (1-M)*source, or by source when mask is absent.
}  // namespace

void blend_rows(Eigen::Ref<Matrix> target, const Matrix& source, const TokenMask* mask) {
    if (mask == nullptr) {
        target = source;
        return;
    }
    for (Eigen::Index i = 0; i < target.rows(); ++i) {
        const float m = (*mask)[static_cast<size_t>(i)];
        target.row(i) = m * target.row(i) + (1.0f - m) * source.row(i);
    }
}

void ModelConfig::validate() const {
    auto check = [](bool ok, const std::string& what) { require(ok, ErrorKind::config, "model config: " + what); };
    check(num_layers > 0, "num_layers must be positive");
    check(num_heads > 0, "num_heads must be positive");
    check(head_dim > 0 && head_dim % 2 == 0, "head_dim must be a positive even integer, got " + std::to_string(head_dim));
    check(model_dim > 0 && model_dim % 2 == 0, "model_dim must be a positive even integer");
    check(mlp_dim > 0, "mlp_dim must be positive");
    check(text_len > 0, "text_len must be positive");
    check(text_embed_dim > 0, "text_embed_dim must be positive");
    check(latent_grid.frames > 0 && latent_grid.height > 0 && latent_grid.width > 0,
          "latent grid must be positive, got " + latent_grid.str());
    check(channel_dim > 0, "channel_dim must be positive");
    check(std::isfinite(text_bias), "text_bias must be finite");
    check(rope_theta > 1.0, "rope_theta must exceed 1");
    check(train_timesteps > 1, "train_timesteps must exceed 1");
    check(beta_start > 0.0 && beta_end > beta_start && beta_end < 1.0, "beta range must satisfy 0 < start < end < 1");
    for (int l : rope_free_layers) {
        check(l >= 0 && l < num_layers, "rope-free layer " + std::to_string(l) + " out of range");
    }
}

std::array<int, 3> rope_axis_pairs(int head_dim) {
    require(head_dim > 0 && head_dim % 2 == 0, ErrorKind::config,
            "rotary embedding needs an even head_dim, got " + std::to_string(head_dim));
    const int pairs = head_dim / 2;
    const int base = pairs / 3;
    return {base + pairs % 3, base, base};
}

RopeTable::RopeTable(std::span<const Position3> positions, int head_dim, double theta)
    : tokens_(static_cast<int>(positions.size())), head_dim_(head_dim) {
    const auto axis_pairs = rope_axis_pairs(head_dim);
    const int pairs = head_dim / 2;
    cos_.resize(static_cast<size_t>(tokens_) * pairs);
    sin_.resize(cos_.size());
    for (int i = 0; i < tokens_; ++i) {
        const Position3& p = positions[static_cast<size_t>(i)];
        const int coords[3] = {p.t, p.h, p.w};
        int j = 0;
        for (int axis = 0; axis < 3; ++axis) {
            const int n = axis_pairs[static_cast<size_t>(axis)];
            for (int k = 0; k < n; ++k, ++j) {
                const double freq = std::pow(theta, -static_cast<double>(k) / n);
                const double angle = coords[axis] * freq;
                cos_[static_cast<size_t>(i) * pairs + j] = static_cast<float>(std::cos(angle));
                sin_[static_cast<size_t>(i) * pairs + j] = static_cast<float>(std::sin(angle));
            }
        }
    }
}

void RopeTable::apply(Matrix& x, int heads) const {
    require(x.rows() == tokens_ && x.cols() == static_cast<Eigen::Index>(heads) * head_dim_, ErrorKind::config,
            "rotary embedding: tensor " + shape_str(x) + " does not match " + std::to_string(tokens_) + " positions x " +
                std::to_string(heads) + " heads x " + std::to_string(head_dim_));
    const int pairs = head_dim_ / 2;
    for (int i = 0; i < tokens_; ++i) {
        float* row = x.row(i).data();
        const float* c = &cos_[static_cast<size_t>(i) * pairs];
        const float* s = &sin_[static_cast<size_t>(i) * pairs];
        for (int h = 0; h < heads; ++h) {
            float* v = row + static_cast<ptrdiff_t>(h) * head_dim_;
            for (int j = 0; j < pairs; ++j) {
                const float x0 = v[2 * j];
                const float x1 = v[2 * j + 1];
                v[2 * j] = x0 * c[j] - x1 * s[j];
                v[2 * j + 1] = x0 * s[j] + x1 * c[j];
            }
        }
    }
}

Matrix apply_rope(const Matrix& x, int heads, int head_dim, std::span<const Position3> positions, double theta) {
    require(static_cast<Eigen::Index>(positions.size()) == x.rows(), ErrorKind::config,
            "rotary embedding: " + std::to_string(positions.size()) + " positions for " + std::to_string(x.rows()) +
                " tokens");
    RopeTable table(positions, head_dim, theta);
    Matrix out = x;
    table.apply(out, heads);
    return out;
}

void ForwardRecords::merge(const ForwardRecords& other) {
    for (const auto& [key, value] : other.kv) {
        kv[key] = value;
    }
    for (const auto& [key, value] : other.attention) {
        attention[key] = value;
    }
}

Matrix layer_norm(const Matrix& x, float eps) {
    const Eigen::VectorXf mean = x.rowwise().mean();
    Matrix centered = x.colwise() - mean;
    const Eigen::VectorXf inv_std =
        (centered.array().square().rowwise().mean() + eps).rsqrt().matrix();
    return inv_std.asDiagonal() * centered;
}

void validate_hooks(const ModelConfig& config, const HookMap& hooks) {
    for (const auto& [layer, h] : hooks) {
        require(layer >= 0 && layer < config.num_layers, ErrorKind::config,
                "hook plan references layer " + std::to_string(layer) + " but the model has " +
                    std::to_string(config.num_layers) + " layers");
        require(!(h.bypass && h.inject), ErrorKind::config,
                "layer " + std::to_string(layer) + ": bypass and KV injection are mutually exclusive");
    }
}

Model::Model(ModelConfig config)
    : config_(std::move(config)),
      positions_((config_.validate(), grid_positions(config_.latent_grid))),
      rope_(positions_, config_.head_dim, config_.rope_theta) {
    const int d = config_.model_dim;
    const int a = config_.attn_dim();
    const int c = config_.channel_dim;
    const int m = config_.mlp_dim;

    GaussianStream rng(config_.init_seed);
    weights_.w_in = rng.matrix(c, d, 1.0 / std::sqrt(c));
    weights_.w_txt = rng.matrix(config_.text_embed_dim, d, 1.0 / std::sqrt(config_.text_embed_dim));
    weights_.w_time = rng.matrix(d, d, 1.0 / std::sqrt(d));
    weights_.w_out = rng.matrix(d, c, 1.0 / std::sqrt(d));

    // Query/key offsets make b_q . R(dp) . b_k a relative-position term in rotary layers.
    const double offset_scale = 0.5;
    weights_.layers.resize(static_cast<size_t>(config_.num_layers));
    for (int l = 0; l < config_.num_layers; ++l) {
        LayerWeights& lw = weights_.layers[static_cast<size_t>(l)];
        lw.wq = rng.matrix(d, a, 1.0 / std::sqrt(d));
        lw.wk = rng.matrix(d, a, 1.0 / std::sqrt(d));
        lw.wv = rng.matrix(d, a, 1.0 / std::sqrt(d));
        lw.wo = rng.matrix(a, d, 1.0 / std::sqrt(a));
        lw.w1 = rng.matrix(d, m, 1.0 / std::sqrt(d));
        lw.w2 = rng.matrix(m, d, 0.5 / std::sqrt(m));
        lw.bq = rng.matrix(1, a, offset_scale);
        lw.bk = rng.matrix(1, a, offset_scale);
        lw.logit_scale = static_cast<float>(1.5 + 1.5 * rng.uniform());
        lw.attn_gain = static_cast<float>(0.5 + rng.uniform());
        lw.text_bias = static_cast<float>(config_.text_bias * (0.5 + rng.uniform()));
        lw.rope_free = config_.rope_free_layers.contains(l);
        if (lw.rope_free) {
            lw.bq.setZero();
            lw.bk.setZero();
        }
    }

    alpha_bar_.resize(static_cast<size_t>(config_.train_timesteps));
    const double s0 = std::sqrt(config_.beta_start);
    const double s1 = std::sqrt(config_.beta_end);
    double prod = 1.0;
    for (int t = 0; t < config_.train_timesteps; ++t) {
        const double s = s0 + (s1 - s0) * t / (config_.train_timesteps - 1);
        prod *= 1.0 - s * s;
        alpha_bar_[static_cast<size_t>(t)] = prod;
    }
}

double Model::signal_level(int train_t) const {
    require(train_t >= 0 && train_t < config_.train_timesteps, ErrorKind::config,
            "training timestep " + std::to_string(train_t) + " out of range");
    return alpha_bar_[static_cast<size_t>(train_t)];
}

std::uint64_t Model::checksum() const {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    hash_matrix(hash, weights_.w_in);
    hash_matrix(hash, weights_.w_txt);
    hash_matrix(hash, weights_.w_time);
    hash_matrix(hash, weights_.w_out);
    for (const auto& lw : weights_.layers) {
        for (const Matrix* w : {&lw.wq, &lw.wk, &lw.wv, &lw.wo, &lw.w1, &lw.w2}) {
            hash_matrix(hash, *w);
        }
        hash_matrix(hash, lw.bq);
        hash_matrix(hash, lw.bk);
        hash_float(hash, lw.logit_scale);
        hash_float(hash, lw.attn_gain);
        hash_float(hash, lw.text_bias);
        hash_float(hash, lw.rope_free ? 1.0f : 0.0f);
    }
    return hash;
}

Vector Model::timestep_code(int train_t) const {
    const int half = config_.model_dim / 2;
    Vector code(config_.model_dim);
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        code[i] = static_cast<float>(std::sin(train_t * freq));
        code[i + half] = static_cast<float>(std::cos(train_t * freq));
    }
    return code;
}

TokenSequence Model::embed_inputs(const LatentVideo& latents, const Matrix& prompt_rows, int train_t) const {
    require(latents.grid == config_.latent_grid && latents.channels() == config_.channel_dim, ErrorKind::config,
            "latent " + latents.grid.str() + "x" + std::to_string(latents.channels()) + " does not match model grid " +
                config_.latent_grid.str() + "x" + std::to_string(config_.channel_dim));
    require(prompt_rows.rows() == config_.text_len && prompt_rows.cols() == config_.text_embed_dim, ErrorKind::config,
            "prompt embedding " + shape_str(prompt_rows) + " does not match text_len x text_embed_dim");
    TokenSequence seq;
    seq.text_len = config_.text_len;
    seq.tokens.resize(config_.total_tokens(), config_.model_dim);
    seq.text().noalias() = prompt_rows * weights_.w_txt;
    const Vector temb = timestep_code(train_t) * weights_.w_time;
    seq.visual().noalias() = latents.data * weights_.w_in;
    seq.visual().rowwise() += temb;
    return seq;
}

LayerOutput Model::attention_forward(TokenSequence& seq, int layer, const LayerHooks& hooks, StepInfo step) const {
    require(layer >= 0 && layer < config_.num_layers, ErrorKind::config,
            "layer " + std::to_string(layer) + " out of range");
    require(!(hooks.bypass && hooks.inject), ErrorKind::config,
            "layer " + std::to_string(layer) + ": bypass and KV injection are mutually exclusive");
    LayerOutput out;
    if (hooks.bypass) {
        return out;
    }

    const LayerWeights& lw = weights_.layers[static_cast<size_t>(layer)];
    const int n_text = seq.text_len;
    const int n_vis = static_cast<int>(seq.tokens.rows()) - n_text;
    const int n_total = n_text + n_vis;
    const int heads = config_.num_heads;
    const int hd = config_.head_dim;

    const Matrix x = layer_norm(seq.tokens);
    Matrix q = x * lw.wq;
    Matrix k = x * lw.wk;
    Matrix v = x * lw.wv;
    q.rowwise() += lw.bq;
    k.rowwise() += lw.bk;

    if (hooks.capture_kv) {
        auto pack = std::make_shared<KVPack>();
        pack->keys = k.bottomRows(n_vis);
        pack->values = v.bottomRows(n_vis);
        pack->layer = layer;
        pack->timestep = step.index;
        out.kv = std::move(pack);
    }

    if (hooks.inject) {
        const KvInjection& inj = *hooks.inject;
        require(inj.source != nullptr, ErrorKind::injection, "layer " + std::to_string(layer) + ": no source KV");
        const KVPack& src = *inj.source;
        const bool shapes_ok = src.keys.rows() == n_vis && src.keys.cols() == k.cols() &&
                               src.values.rows() == n_vis && src.values.cols() == v.cols();
        require(shapes_ok, ErrorKind::injection,
                "layer " + std::to_string(layer) + ": injected keys " + shape_str(src.keys) + " / values " +
                    shape_str(src.values) + " do not match layer visual KV [" + std::to_string(n_vis) + "x" +
                    std::to_string(k.cols()) + "]");
        if (inj.mask) {
            require(static_cast<int>(inj.mask->size()) == n_vis, ErrorKind::injection,
                    "layer " + std::to_string(layer) + ": mask has " + std::to_string(inj.mask->size()) +
                        " entries for " + std::to_string(n_vis) + " visual tokens");
        }
        blend_rows(k.bottomRows(n_vis), src.keys, inj.mask.get());
        blend_rows(v.bottomRows(n_vis), src.values, inj.mask.get());
    }

    if (!lw.rope_free) {
        Matrix qv = q.bottomRows(n_vis);
        rope_.apply(qv, heads);
        q.bottomRows(n_vis) = qv;
        if (!hooks.rope_drop_key) {
            Matrix kv = k.bottomRows(n_vis);
            rope_.apply(kv, heads);
            k.bottomRows(n_vis) = kv;
        }
    }

    const float scale = lw.logit_scale / std::sqrt(static_cast<float>(hd));
    Matrix attn_out(n_total, heads * hd);
    Matrix scores(n_total, n_total);
    Matrix avg;
    if (hooks.capture_attention) {
        avg = Matrix::Zero(n_total, n_total);
    }
    for (int h = 0; h < heads; ++h) {
        scores.noalias() = q.middleCols(h * hd, hd) * k.middleCols(h * hd, hd).transpose();
        scores *= scale;
        if (lw.text_bias != 0.0f) {
            scores.block(n_text, 0, n_vis, n_text).array() += lw.text_bias;
        }
        if (hooks.block_text_to_visual) {
            scores.block(0, n_text, n_text, n_vis).setConstant(-std::numeric_limits<float>::infinity());
        }
        const Eigen::VectorXf row_max = scores.rowwise().maxCoeff();
        scores.colwise() -= row_max;
        scores = scores.array().exp().matrix();
        const Eigen::VectorXf inv_sum = scores.rowwise().sum().cwiseInverse();
        scores = inv_sum.asDiagonal() * scores;
        attn_out.middleCols(h * hd, hd).noalias() = scores * v.middleCols(h * hd, hd);
        if (hooks.capture_attention) {
            avg += scores;
        }
    }
    if (hooks.capture_attention) {
        auto map = std::make_shared<AttentionMap>();
        map->weights = avg / static_cast<float>(heads);
        map->layer = layer;
        map->timestep = step.index;
        map->text_len = n_text;
        out.attention = std::move(map);
    }

    seq.tokens.noalias() += lw.attn_gain * (attn_out * lw.wo);
    const Matrix hidden = gelu(layer_norm(seq.tokens) * lw.w1);
    seq.tokens.noalias() += hidden * lw.w2;
    return out;
}

Matrix Model::predict_clean(const TokenSequence& seq) const {
    return layer_norm(Matrix(seq.visual())) * weights_.w_out;
}

ForwardResult Model::forward(const LatentVideo& latents, const Matrix& prompt_rows, StepInfo step,
                             const HookMap& hooks) const {
    validate_hooks(config_, hooks);
    TokenSequence seq = embed_inputs(latents, prompt_rows, step.train_t);
    ForwardResult result;
    static const LayerHooks kNoHooks{};
    for (int l = 0; l < config_.num_layers; ++l) {
        const auto it = hooks.find(l);
        const LayerHooks& h = it == hooks.end() ? kNoHooks : it->second;
        LayerOutput lo = attention_forward(seq, l, h, step);
        if (lo.kv) {
            result.records.kv[{l, step.index}] = std::move(lo.kv);
        }
        if (lo.attention) {
            result.records.attention[{l, step.index}] = std::move(lo.attention);
        }
    }
    const Matrix clean = predict_clean(seq);
    const double a = signal_level(step.train_t);
    const float sa = static_cast<float>(std::sqrt(a));
    const float inv_sn = static_cast<float>(1.0 / std::sqrt(1.0 - a));
    result.noise_prediction = LatentVideo(latents.grid, ((latents.data - sa * clean) * inv_sn).eval());
    return result;
}

}  // namespace kvedit
