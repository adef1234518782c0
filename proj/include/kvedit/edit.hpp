// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kvedit/sampler.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kvedit {

/// Target-prompt tokens left out of the longest common subsequence with the source.
struct DeltaTokens {
    std::vector<int> indices;  // ascending, into the target token list
    std::vector<std::string> words;
    std::vector<std::pair<int, int>> runs;  // contiguous [begin, end) index ranges

    bool empty() const { return indices.empty(); }
};

DeltaTokens find_delta_tokens(const std::vector<std::string>& src, const std::vector<std::string>& trg);
DeltaTokens find_delta_tokens(std::string_view src_prompt, std::string_view trg_prompt);

struct MaskPipelineConfig {
    double k = 10.0;
    double c_k = 0.1;
    int blur_kernel = 3;
    double blur_sigma = 1.0;
    double threshold = 0.8;
    int window = 3;  // accumulation steps T_i - window .. T_i - 1

    void validate() const;
};

/// y = min(1, log(kx + 1) / log(c_k k + 1)).
double rescale_attention(double x, double k, double c_k);

/// Real-valued map over the visual latent grid, canonical token order.
struct GridMap {
    LatentGrid grid;
    std::vector<double> values;

    GridMap() = default;
    explicit GridMap(LatentGrid g, double fill = 0.0) : grid(g), values(static_cast<size_t>(g.tokens()), fill) {}
    double& at(int f, int y, int x) { return values[static_cast<size_t>(grid.index(f, y, x))]; }
    double at(int f, int y, int x) const { return values[static_cast<size_t>(grid.index(f, y, x))]; }
};

/// Sum over `steps` of the head-averaged attention from every visual query to the
/// delta-token columns, averaged over delta tokens.
GridMap accumulate_delta_attention(const ForwardRecords& records, const DeltaTokens& delta, int layer,
                                   const std::vector<int>& steps, const LatentGrid& grid);

/// Min-max normalization to [0, 1]. A flat map (max == min) returns nullopt.
std::optional<GridMap> normalize_map(const GridMap& map);

/// Separable Gaussian blur within each latent frame, reflect-101 borders.
GridMap gaussian_blur(const GridMap& map, int kernel, double sigma);

struct EditMask {
    LatentGrid grid;
    std::vector<std::uint8_t> bits;  // M_obj, canonical token order
    GridMap raw;                     // accumulated delta attention before normalization
    int layer = -1;
    std::vector<int> steps;
    bool degenerate = false;  // the raw map was flat
    std::vector<std::string> warnings;

    size_t count() const;
    bool empty() const { return count() == 0; }
    std::shared_ptr<const TokenMask> token_mask() const;

    static EditMask filled(const LatentGrid& grid, bool value);
};

/// Rescale, blur, binarize (strictly above the threshold). `normalized` is in [0, 1].
EditMask preprocess_mask(const GridMap& normalized, const MaskPipelineConfig& config);

/// Full extraction: accumulate, normalize, preprocess. A flat map yields an empty
/// mask with a warning.
EditMask extract_edit_mask(const ForwardRecords& records, const DeltaTokens& delta, int layer,
                           const std::vector<int>& steps, const LatentGrid& grid, const MaskPipelineConfig& config);

struct KvMix {
    Matrix keys;
    Matrix values;
};

/// K_mix = M K_trg + (1 - M) K_src, likewise for V. A null mask selects the source.
KvMix mix_kv(const Matrix& k_src, const Matrix& v_src, const Matrix& k_trg, const Matrix& v_trg,
             const TokenMask* mask);

/// Prominent layer of the default toy model (largest prominence on its RoPE sweep).
inline constexpr int kToyProminentLayer = 0;

enum class EditMode { object_addition, non_rigid };

std::string_view edit_mode_name(EditMode mode);

struct InjectionPlan {
    EditMode mode = EditMode::object_addition;
    std::vector<int> vital_layers;
    std::vector<int> non_vital_layers;
    int prominent_layer = -1;
    int t_i = 10;
    int t_e = 25;
    bool preserve_prompt = true;
    /// Non-rigid ablation: inject into the vital set instead of the non-vital one.
    bool use_vital_for_non_rigid = false;
    MaskPipelineConfig mask;

    /// Throws ErrorKind::config on violated bounds.
    void validate(int num_layers, int steps) const;

    /// Layer lists and prominent layer for the 42-layer backbone.
    static InjectionPlan backbone(EditMode mode);
    /// Layer lists measured on the default toy model; see the README.
    static InjectionPlan toy(EditMode mode);
    /// Picks backbone() for 42 layers and toy() otherwise.
    static InjectionPlan defaults_for(const ModelConfig& config, EditMode mode);
};

struct ObjectAdditionOptions {
    /// Replaces the extracted mask in phase 2 (extraction still runs when the delta is non-empty).
    std::shared_ptr<const EditMask> forced_mask;
    /// Permit an empty delta; requires forced_mask.
    bool allow_empty_delta = false;
    std::optional<LatentVideo> initial;  // shared z_0, from inversion
};

struct EditResult {
    Video source_video;
    Video target_video;
    LatentVideo source_latent;
    LatentVideo target_latent;
    DeltaTokens delta;
    std::optional<EditMask> mask;  // object addition only
    std::map<int, std::shared_ptr<const AttentionMap>> attention;  // window captures by step
    std::vector<double> divergence;
    std::vector<std::string> warnings;
};

/// Three-phase coupling: full vital-layer injection before T_i with attention
/// capture in the window, mask extraction at T_i - 1, masked injection in
/// [T_i, T_e), then free generation.
class ObjectAdditionCoupling final : public Coupling {
public:
    ObjectAdditionCoupling(InjectionPlan plan, DeltaTokens delta, LatentGrid grid,
                           std::shared_ptr<const EditMask> forced_mask = nullptr);

    int horizon() const override { return plan_.t_e; }
    HookMap source_hooks(int step) const override;
    HookMap target_hooks(int step, const ForwardRecords& source) const override;
    void observe_target(int step, const ForwardRecords& target) override;

    const std::optional<EditMask>& mask() const { return mask_; }
    const ForwardRecords& captured() const { return captured_; }

private:
    bool in_window(int step) const;

    InjectionPlan plan_;
    DeltaTokens delta_;
    LatentGrid grid_;
    std::shared_ptr<const EditMask> forced_;
    std::optional<EditMask> mask_;
    std::shared_ptr<const TokenMask> active_;
    ForwardRecords captured_;
};

EditResult object_addition(const Pipeline& pipe, const std::string& src_prompt, const std::string& trg_prompt,
                           std::uint64_t seed, const InjectionPlan& plan, const ObjectAdditionOptions& options = {});

EditResult non_rigid_edit(const Pipeline& pipe, const std::string& src_prompt, const std::string& trg_prompt,
                          std::uint64_t seed, const InjectionPlan& plan,
                          const std::optional<LatentVideo>& initial = std::nullopt);

struct RealEditResult {
    LatentVideo inverted;  // z_0 estimate
    Video reconstruction;  // source stream from the inverted noise
    EditResult edit;
};

/// Inverts the video under the source prompt, then edits from that noise.
RealEditResult edit_real_video(const Pipeline& pipe, const Video& video, const std::string& src_prompt,
                               const std::string& trg_prompt, const InjectionPlan& plan);

/// Pixel-level change region |a - b| > tol (any channel) and its IoU with an
/// edit mask upsampled to pixel resolution.
double change_mask_iou(const Video& a, const Video& b, const EditMask& mask, int patch, double tol);

}  // namespace kvedit
