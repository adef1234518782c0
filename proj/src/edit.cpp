// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvedit/edit.hpp"

#include "kvedit/error.hpp"
#include "kvedit/probe.hpp"
#include "kvedit/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace kvedit {

DeltaTokens find_delta_tokens(const std::vector<std::string>& src, const std::vector<std::string>& trg) {
    const size_t n = src.size();
    const size_t m = trg.size();
    // suffix LCS lengths
    std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
    for (size_t i = n; i-- > 0;) {
        for (size_t j = m; j-- > 0;) {
            dp[i][j] = src[i] == trg[j] ? dp[i + 1][j + 1] + 1 : std::max(dp[i + 1][j], dp[i][j + 1]);
        }
    }
    DeltaTokens delta;
    size_t i = 0;
    size_t j = 0;
    while (j < m) {
        if (i < n && src[i] == trg[j] && dp[i][j] == dp[i + 1][j + 1] + 1) {
            ++i;
            ++j;
        } else if (i >= n || dp[i][j + 1] >= dp[i + 1][j]) {
            delta.indices.push_back(static_cast<int>(j));
            delta.words.push_back(trg[j]);
            ++j;
        } else {
            ++i;
        }
    }
    for (int idx : delta.indices) {
        if (!delta.runs.empty() && delta.runs.back().second == idx) {
            ++delta.runs.back().second;
        } else {
            delta.runs.emplace_back(idx, idx + 1);
        }
    }
    return delta;
}

DeltaTokens find_delta_tokens(std::string_view src_prompt, std::string_view trg_prompt) {
    const auto src = tokenize(src_prompt);
    const auto trg = tokenize(trg_prompt);
    require(!src.empty() && !trg.empty(), ErrorKind::config, "delta tokens: both prompts must contain tokens");
    return find_delta_tokens(src, trg);
}

void MaskPipelineConfig::validate() const {
    require(k > 0.0 && c_k > 0.0, ErrorKind::config, "mask pipeline: k and c_k must be positive");
    require(blur_kernel > 0 && blur_kernel % 2 == 1, ErrorKind::config,
            "mask pipeline: blur kernel must be a positive odd integer, got " + std::to_string(blur_kernel));
    require(blur_sigma > 0.0, ErrorKind::config, "mask pipeline: blur sigma must be positive");
    require(threshold > 0.0 && threshold < 1.0, ErrorKind::config,
            "mask pipeline: threshold must lie strictly inside (0, 1), got " + std::to_string(threshold));
    require(window >= 1, ErrorKind::config, "mask pipeline: accumulation window must be at least one step");
}

double rescale_attention(double x, double k, double c_k) {
    const double denom = std::log(c_k * k + 1.0);
    require(denom > 0.0, ErrorKind::config, "rescale: log(c_k * k + 1) must be positive");
    require(x >= 0.0 && x <= 1.0, ErrorKind::domain, "rescale: input " + std::to_string(x) + " outside [0, 1]");
    return std::min(1.0, std::log(k * x + 1.0) / denom);
}

GridMap accumulate_delta_attention(const ForwardRecords& records, const DeltaTokens& delta, int layer,
                                   const std::vector<int>& steps, const LatentGrid& grid) {
    require(!delta.empty(), ErrorKind::no_edit, "delta attention: no delta tokens");
    GridMap acc(grid);
    const int n_vis = grid.tokens();
    for (int step : steps) {
        const auto it = records.attention.find({layer, step});
        require(it != records.attention.end(), ErrorKind::missing_data,
                "no attention captured at layer " + std::to_string(layer) + " for step " + std::to_string(step));
        const AttentionMap& a = *it->second;
        require(a.weights.rows() == a.text_len + n_vis && a.weights.cols() == a.weights.rows(), ErrorKind::config,
                "attention map at step " + std::to_string(step) + " does not match the latent grid " + grid.str());
        for (int idx : delta.indices) {
            require(idx >= 0 && idx < a.text_len, ErrorKind::config,
                    "delta token " + std::to_string(idx) + " outside the text length " + std::to_string(a.text_len));
        }
        const double inv = 1.0 / static_cast<double>(delta.indices.size());
        for (int q = 0; q < n_vis; ++q) {
            double sum = 0.0;
            for (int idx : delta.indices) {
                sum += a.weights(a.text_len + q, idx);
            }
            acc.values[static_cast<size_t>(q)] += sum * inv;
        }
    }
    return acc;
}

std::optional<GridMap> normalize_map(const GridMap& map) {
    const auto [lo_it, hi_it] = std::minmax_element(map.values.begin(), map.values.end());
    if (lo_it == map.values.end() || *lo_it == *hi_it) {
        return std::nullopt;
    }
    const double lo = *lo_it;
    const double span = *hi_it - lo;
    GridMap out(map.grid);
    for (size_t i = 0; i < map.values.size(); ++i) {
        out.values[i] = (map.values[i] - lo) / span;
    }
    return out;
}

namespace {

int reflect101(int i, int n) {
    if (n == 1) {
        return 0;
    }
    while (i < 0 || i >= n) {
        i = i < 0 ? -i : 2 * n - 2 - i;
    }
    return i;
}

}  // namespace

GridMap gaussian_blur(const GridMap& map, int kernel, double sigma) {
    require(kernel > 0 && kernel % 2 == 1 && sigma > 0.0, ErrorKind::config, "blur: kernel must be odd and sigma positive");
    const int r = kernel / 2;
    std::vector<double> w(static_cast<size_t>(kernel));
    double total = 0.0;
    for (int j = -r; j <= r; ++j) {
        w[static_cast<size_t>(j + r)] = std::exp(-(j * j) / (2.0 * sigma * sigma));
        total += w[static_cast<size_t>(j + r)];
    }
    for (double& v : w) {
        v /= total;
    }
    const LatentGrid& g = map.grid;
    GridMap tmp(g);
    GridMap out(g);
    for (int f = 0; f < g.frames; ++f) {
        for (int y = 0; y < g.height; ++y) {
            for (int x = 0; x < g.width; ++x) {
                double s = 0.0;
                for (int j = -r; j <= r; ++j) {
                    s += w[static_cast<size_t>(j + r)] * map.at(f, y, reflect101(x + j, g.width));
                }
                tmp.at(f, y, x) = s;
            }
        }
        for (int y = 0; y < g.height; ++y) {
            for (int x = 0; x < g.width; ++x) {
                double s = 0.0;
                for (int j = -r; j <= r; ++j) {
                    s += w[static_cast<size_t>(j + r)] * tmp.at(f, reflect101(y + j, g.height), x);
                }
                out.at(f, y, x) = s;
            }
        }
    }
    return out;
}

size_t EditMask::count() const {
    return static_cast<size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::shared_ptr<const TokenMask> EditMask::token_mask() const {
    auto m = std::make_shared<TokenMask>(bits.size());
    std::transform(bits.begin(), bits.end(), m->begin(), [](std::uint8_t b) { return b ? 1.0f : 0.0f; });
    return m;
}

EditMask EditMask::filled(const LatentGrid& grid, bool value) {
    EditMask m;
    m.grid = grid;
    m.bits.assign(static_cast<size_t>(grid.tokens()), value ? 1 : 0);
    m.raw = GridMap(grid);
    return m;
}

EditMask preprocess_mask(const GridMap& normalized, const MaskPipelineConfig& config) {
    config.validate();
    GridMap rescaled(normalized.grid);
    for (size_t i = 0; i < normalized.values.size(); ++i) {
        rescaled.values[i] = rescale_attention(normalized.values[i], config.k, config.c_k);
    }
    const GridMap blurred = gaussian_blur(rescaled, config.blur_kernel, config.blur_sigma);
    EditMask mask;
    mask.grid = normalized.grid;
    mask.raw = normalized;
    mask.bits.resize(blurred.values.size());
    for (size_t i = 0; i < blurred.values.size(); ++i) {
        mask.bits[i] = blurred.values[i] > config.threshold ? 1 : 0;
    }
    if (mask.empty()) {
        mask.warnings.emplace_back("edit mask is empty after preprocessing");
    }
    return mask;
}

EditMask extract_edit_mask(const ForwardRecords& records, const DeltaTokens& delta, int layer,
                           const std::vector<int>& steps, const LatentGrid& grid, const MaskPipelineConfig& config) {
    const GridMap raw = accumulate_delta_attention(records, delta, layer, steps, grid);
    const auto normalized = normalize_map(raw);
    EditMask mask;
    if (normalized) {
        mask = preprocess_mask(*normalized, config);
    } else {
        mask = EditMask::filled(grid, false);
        mask.degenerate = true;
        mask.warnings.emplace_back("accumulated delta attention is flat; edit mask left empty");
    }
    mask.raw = raw;
    mask.layer = layer;
    mask.steps = steps;
    return mask;
}

KvMix mix_kv(const Matrix& k_src, const Matrix& v_src, const Matrix& k_trg, const Matrix& v_trg,
             const TokenMask* mask) {
    auto shape = [](const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); };
    require(k_src.rows() == k_trg.rows() && k_src.cols() == k_trg.cols() && v_src.rows() == v_trg.rows() &&
                v_src.cols() == v_trg.cols() && k_src.rows() == v_src.rows(),
            ErrorKind::injection,
            "mix_kv: shapes differ (K src " + shape(k_src) + ", K trg " + shape(k_trg) + ", V src " + shape(v_src) +
                ", V trg " + shape(v_trg) + ")");
    require(mask == nullptr || static_cast<Eigen::Index>(mask->size()) == k_src.rows(), ErrorKind::injection,
            "mix_kv: mask covers " + std::to_string(mask ? mask->size() : 0) + " tokens, keys have " +
                std::to_string(k_src.rows()));
    KvMix out{k_trg, v_trg};
    blend_rows(out.keys, k_src, mask);
    blend_rows(out.values, v_src, mask);
    return out;
}

std::string_view edit_mode_name(EditMode mode) {
    return mode == EditMode::object_addition ? "object-addition" : "non-rigid";
}

void InjectionPlan::validate(int num_layers, int steps) const {
    auto check_layers = [&](const std::vector<int>& layers, const char* what) {
        for (int l : layers) {
            require(l >= 0 && l < num_layers, ErrorKind::config,
                    std::string(what) + " layer " + std::to_string(l) + " outside 0.." + std::to_string(num_layers - 1));
        }
    };
    check_layers(vital_layers, "vital");
    check_layers(non_vital_layers, "non-vital");
    if (mode == EditMode::object_addition) {
        mask.validate();
        require(t_i > 0 && t_i <= t_e && t_e <= steps, ErrorKind::config,
                "plan needs 0 < T_i <= T_e <= T, got T_i=" + std::to_string(t_i) + " T_e=" + std::to_string(t_e) +
                    " T=" + std::to_string(steps));
        require(t_i >= mask.window, ErrorKind::config,
                "T_i=" + std::to_string(t_i) + " leaves no room for the " + std::to_string(mask.window) +
                    "-step mask window");
        require(!vital_layers.empty(), ErrorKind::config, "object addition needs at least one vital layer");
        require(prominent_layer >= 0 && prominent_layer < num_layers, ErrorKind::config,
                "prominent layer not configured (got " + std::to_string(prominent_layer) + ")");
    } else {
        require(t_e > 0 && t_e <= steps, ErrorKind::config,
                "plan needs 0 < T_e <= T, got T_e=" + std::to_string(t_e) + " T=" + std::to_string(steps));
        const auto& layers = use_vital_for_non_rigid ? vital_layers : non_vital_layers;
        require(!layers.empty(), ErrorKind::config,
                use_vital_for_non_rigid ? "non-rigid ablation needs vital layers" : "non-rigid editing needs non-vital layers");
    }
}

InjectionPlan InjectionPlan::backbone(EditMode mode) {
    InjectionPlan plan;
    plan.mode = mode;
    plan.vital_layers = backbone_vital_layers();
    plan.non_vital_layers = backbone_non_vital_layers();
    plan.prominent_layer = kBackboneProminentLayer;
    return plan;
}

InjectionPlan InjectionPlan::toy(EditMode mode) {
    InjectionPlan plan;
    plan.mode = mode;
    plan.vital_layers = {0, 1, 3};
    plan.non_vital_layers = {4, 6, 7};
    plan.prominent_layer = kToyProminentLayer;
    return plan;
}

InjectionPlan InjectionPlan::defaults_for(const ModelConfig& config, EditMode mode) {
    return config.num_layers == kBackboneLayers ? backbone(mode) : toy(mode);
}

ObjectAdditionCoupling::ObjectAdditionCoupling(InjectionPlan plan, DeltaTokens delta, LatentGrid grid,
                                               std::shared_ptr<const EditMask> forced_mask)
    : plan_(std::move(plan)), delta_(std::move(delta)), grid_(grid), forced_(std::move(forced_mask)) {
    require(!delta_.empty() || forced_, ErrorKind::no_edit, "object addition needs delta tokens or a forced mask");
    if (forced_) {
        require(forced_->grid == grid_ && forced_->bits.size() == static_cast<size_t>(grid_.tokens()), ErrorKind::config,
                "forced mask does not cover the latent grid " + grid_.str());
    }
}

bool ObjectAdditionCoupling::in_window(int step) const {
    return step >= plan_.t_i - plan_.mask.window && step < plan_.t_i;
}

HookMap ObjectAdditionCoupling::source_hooks(int step) const {
    HookMap hooks;
    if (step < plan_.t_e) {
        for (int l : plan_.vital_layers) {
            hooks[l].capture_kv = true;
        }
    }
    return hooks;
}

HookMap ObjectAdditionCoupling::target_hooks(int step, const ForwardRecords& source) const {
    HookMap hooks;
    if (step < plan_.t_e) {
        std::shared_ptr<const TokenMask> mask;
        if (step >= plan_.t_i) {
            require(active_ != nullptr, ErrorKind::missing_data,
                    "no edit mask available at step " + std::to_string(step));
            mask = active_;
        }
        for (int l : plan_.vital_layers) {
            const auto it = source.kv.find({l, step});
            require(it != source.kv.end(), ErrorKind::missing_data,
                    "no source KV captured for layer " + std::to_string(l) + " at step " + std::to_string(step));
            LayerHooks& h = hooks[l];
            h.inject = KvInjection{it->second, mask};
            h.block_text_to_visual = plan_.preserve_prompt;
        }
    }
    if (in_window(step) && !delta_.empty()) {
        hooks[plan_.prominent_layer].capture_attention = true;
    }
    return hooks;
}

void ObjectAdditionCoupling::observe_target(int step, const ForwardRecords& target) {
    if (in_window(step) && !delta_.empty()) {
        const auto it = target.attention.find({plan_.prominent_layer, step});
        require(it != target.attention.end(), ErrorKind::missing_data,
                "no attention captured at layer " + std::to_string(plan_.prominent_layer) + " for step " +
                    std::to_string(step));
        captured_.attention.insert(*it);
    }
    if (step != plan_.t_i - 1) {
        return;
    }
    if (!delta_.empty()) {
        std::vector<int> steps;
        for (int s = plan_.t_i - plan_.mask.window; s < plan_.t_i; ++s) {
            steps.push_back(s);
        }
        mask_ = extract_edit_mask(captured_, delta_, plan_.prominent_layer, steps, grid_, plan_.mask);
    }
    active_ = forced_ ? forced_->token_mask() : mask_->token_mask();
}

namespace {

DeltaTokens visible_delta(const Pipeline& pipe, const std::string& src, const std::string& trg,
                          std::vector<std::string>& warnings) {
    DeltaTokens delta = find_delta_tokens(src, trg);
    const int text_len = pipe.text().text_len();
    DeltaTokens kept;
    for (size_t i = 0; i < delta.indices.size(); ++i) {
        if (delta.indices[i] < text_len) {
            kept.indices.push_back(delta.indices[i]);
            kept.words.push_back(delta.words[i]);
        }
    }
    if (kept.indices.size() != delta.indices.size()) {
        warnings.push_back("delta tokens past the text length " + std::to_string(text_len) + " were dropped");
    }
    for (const auto& [b, e] : delta.runs) {
        if (b < text_len) {
            kept.runs.emplace_back(b, std::min(e, text_len));
        }
    }
    return kept;
}

EditResult collect(PairedResult&& paired) {
    EditResult r;
    r.source_video = std::move(paired.source_video);
    r.target_video = std::move(paired.target_video);
    r.source_latent = std::move(paired.source_latent);
    r.target_latent = std::move(paired.target_latent);
    r.divergence = std::move(paired.divergence);
    return r;
}

}  // namespace

EditResult object_addition(const Pipeline& pipe, const std::string& src_prompt, const std::string& trg_prompt,
                           std::uint64_t seed, const InjectionPlan& plan, const ObjectAdditionOptions& options) {
    require(plan.mode == EditMode::object_addition, ErrorKind::config, "object addition needs an object-addition plan");
    plan.validate(pipe.model().config().num_layers, pipe.schedule().steps);
    std::vector<std::string> warnings;
    DeltaTokens delta = visible_delta(pipe, src_prompt, trg_prompt, warnings);
    if (delta.empty()) {
        require(options.allow_empty_delta && options.forced_mask, ErrorKind::no_edit,
                "target prompt adds no tokens to the source prompt");
    }
    ObjectAdditionCoupling coupling(plan, delta, pipe.model().config().latent_grid, options.forced_mask);
    EditResult r = collect(paired_sample(pipe, {src_prompt, trg_prompt, seed, options.initial}, coupling));
    r.delta = std::move(delta);
    r.mask = coupling.mask();
    for (const auto& [key, map] : coupling.captured().attention) {
        r.attention[key.step] = map;
    }
    if (r.mask) {
        warnings.insert(warnings.end(), r.mask->warnings.begin(), r.mask->warnings.end());
    }
    r.warnings = std::move(warnings);
    return r;
}

EditResult non_rigid_edit(const Pipeline& pipe, const std::string& src_prompt, const std::string& trg_prompt,
                          std::uint64_t seed, const InjectionPlan& plan, const std::optional<LatentVideo>& initial) {
    require(plan.mode == EditMode::non_rigid, ErrorKind::config, "non-rigid editing needs a non-rigid plan");
    plan.validate(pipe.model().config().num_layers, pipe.schedule().steps);
    const auto& layers = plan.use_vital_for_non_rigid ? plan.vital_layers : plan.non_vital_layers;
    UniformCoupling coupling(std::set<int>(layers.begin(), layers.end()), 0, plan.t_e);
    EditResult r = collect(paired_sample(pipe, {src_prompt, trg_prompt, seed, initial}, coupling));
    r.delta = find_delta_tokens(src_prompt, trg_prompt);
    return r;
}

RealEditResult edit_real_video(const Pipeline& pipe, const Video& video, const std::string& src_prompt,
                               const std::string& trg_prompt, const InjectionPlan& plan) {
    RealEditResult out;
    out.inverted = ddim_invert(pipe, video, src_prompt);
    if (plan.mode == EditMode::object_addition) {
        ObjectAdditionOptions options;
        options.initial = out.inverted;
        out.edit = object_addition(pipe, src_prompt, trg_prompt, 0, plan, options);
    } else {
        out.edit = non_rigid_edit(pipe, src_prompt, trg_prompt, 0, plan, out.inverted);
    }
    out.reconstruction = out.edit.source_video;
    return out;
}

double change_mask_iou(const Video& a, const Video& b, const EditMask& mask, int patch, double tol) {
    require(a.same_shape(b), ErrorKind::config, "iou: video shapes differ");
    const LatentGrid& g = mask.grid;
    require(a.frames == g.frames && a.height == g.height * patch && a.width == g.width * patch, ErrorKind::config,
            "iou: mask grid " + g.str() + " does not tile the video with patch " + std::to_string(patch));
    size_t inter = 0;
    size_t uni = 0;
    for (int f = 0; f < a.frames; ++f) {
        for (int y = 0; y < a.height; ++y) {
            for (int x = 0; x < a.width; ++x) {
                bool changed = false;
                for (int c = 0; c < 3; ++c) {
                    changed = changed || std::abs(a.at(f, y, x, c) - b.at(f, y, x, c)) > tol;
                }
                const bool masked = mask.bits[static_cast<size_t>(g.index(f, y / patch, x / patch))] != 0;
                inter += changed && masked;
                uni += changed || masked;
            }
        }
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace kvedit
