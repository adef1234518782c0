// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kvedit/prominence.hpp"
#include "kvedit/video.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kvedit {

/// Joint image/text embedding onto one unit sphere.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed_image(const Video& video, int frame) const = 0;
    virtual std::vector<double> embed_text(std::string_view text) const = 0;
    virtual std::string tag() const = 0;
};

/// Images: 8x8 area-averaged, centered RGB through a seeded Gaussian projection.
/// Text: sum of per-token seeded Gaussian vectors. Both L2-normalized.
class ToyClipEmbedder final : public Embedder {
public:
    explicit ToyClipEmbedder(int dim = 64, std::uint64_t seed = 0xc11b);

    std::vector<double> embed_image(const Video& video, int frame) const override;
    std::vector<double> embed_text(std::string_view text) const override;
    std::string tag() const override;

private:
    int dim_;
    std::uint64_t seed_;
    std::vector<double> projection_;  // [8*8*3 x dim]
};

struct DirectionScore {
    double value = 0.0;
    bool degenerate = false;  // a zero-length direction; value is 0
};

/// Cosine between the text direction and the mean-frame image direction.
DirectionScore clip_dir(const Video& src, const Video& trg, std::string_view src_text, std::string_view trg_text,
                        const Embedder& embedder);

/// Mean framewise cosine between source and target.
double clip_img(const Video& src, const Video& trg, const Embedder& embedder);

/// Temporal-consistency proxies, each in [0, 1].
///   tf: 1 - mean |frame difference|
///   ms: 1 - mean |second difference| / 2
///   sc, bc: mean cosine between consecutive embeddings of the foreground /
///           background region (outside pixels set to mid-gray); whole frame
///           when no regions are given.
struct TemporalScores {
    double tf = 0.0;
    double ms = 0.0;
    double sc = 0.0;
    double bc = 0.0;
};

TemporalScores temporal_metrics(const Video& video, const Embedder& embedder, const RegionMask* regions = nullptr);

inline constexpr std::string_view kTemporalProxyTag = "tf=1-mad;ms=1-msd/2;sc,bc=consecutive-region-cosine";

struct OverallInputs {
    std::optional<double> clip_all, tf, ms, sc, bc;
};

/// clip_all * tf * ms * sc * bc. Throws missing_data naming absent fields.
double overall_score(const OverallInputs& in);
double overall_score(double clip_all, double tf, double ms, double sc, double bc);

struct SampleMetrics {
    std::string src_prompt;
    std::string trg_prompt;
    double clip_dir = 0.0;
    bool clip_dir_degenerate = false;
    double clip_img = 0.0;
    double tf = 0.0;
    double ms = 0.0;
    double sc = 0.0;
    double bc = 0.0;
};

/// How clip_all combines the two CLIP scores over a batch.
enum class ClipAllOrder { product_of_means, mean_of_products };

struct MetricReport {
    double clip_dir = 0.0;
    double clip_img = 0.0;
    double clip_all = 0.0;
    double tf = 0.0;
    double ms = 0.0;
    double sc = 0.0;
    double bc = 0.0;
    double overall = 0.0;
    ClipAllOrder order = ClipAllOrder::product_of_means;
    std::vector<SampleMetrics> samples;
    std::string embedder;
    std::string proxies{kTemporalProxyTag};
};

struct RunPair {
    const Video* src = nullptr;
    const Video* trg = nullptr;
    std::string src_prompt;
    std::string trg_prompt;
    const RegionMask* regions = nullptr;
};

/// Metrics of one pair. Temporal scores are measured on the target video.
SampleMetrics evaluate_pair(const RunPair& pair, const Embedder& embedder);

/// Averages per-pair metrics and aggregates clip_all and overall.
MetricReport evaluate_runs(const std::vector<RunPair>& pairs, const Embedder& embedder,
                           ClipAllOrder order = ClipAllOrder::product_of_means);

MetricReport evaluate_run(const Video& src, const Video& trg, const std::string& src_prompt,
                          const std::string& trg_prompt, const Embedder& embedder,
                          const RegionMask* regions = nullptr);

}  // namespace kvedit
