// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvedit/metrics.hpp"

#include "kvedit/error.hpp"
#include "kvedit/probe.hpp"
#include "kvedit/prompt.hpp"
#include "kvedit/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace kvedit {

namespace {

constexpr int kGrid = 8;

void normalize_or_axis(std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) {
        n += x * x;
    }
    if (n == 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        v[0] = 1.0;
        return;
    }
    n = std::sqrt(n);
    for (double& x : v) {
        x /= n;
    }
}

std::vector<double> mean_frame_embedding(const Video& v, const Embedder& e) {
    std::vector<double> acc;
    for (int f = 0; f < v.frames; ++f) {
        const auto x = e.embed_image(v, f);
        if (acc.empty()) {
            acc.assign(x.size(), 0.0);
        }
        require(x.size() == acc.size(), ErrorKind::config, "embedder returned vectors of varying dimension");
        for (size_t i = 0; i < x.size(); ++i) {
            acc[i] += x[i];
        }
    }
    for (double& a : acc) {
        a /= v.frames;
    }
    return acc;
}

DirectionScore direction_cosine(const std::vector<double>& a0, const std::vector<double>& a1,
                                const std::vector<double>& b0, const std::vector<double>& b1) {
    require(a0.size() == a1.size() && b0.size() == b1.size() && a0.size() == b0.size(), ErrorKind::config,
            "clip_dir: text and image embeddings differ in dimension (" + std::to_string(a0.size()) + " vs " +
                std::to_string(b0.size()) + ")");
    std::vector<double> da(a0.size());
    std::vector<double> db(b0.size());
    double na = 0.0;
    double nb = 0.0;
    for (size_t i = 0; i < da.size(); ++i) {
        da[i] = a1[i] - a0[i];
        db[i] = b1[i] - b0[i];
        na += da[i] * da[i];
        nb += db[i] * db[i];
    }
    if (na == 0.0 || nb == 0.0) {
        return {0.0, true};
    }
    return {std::clamp(cosine(da, db), -1.0, 1.0), false};
}

Video masked_copy(const Video& v, const RegionMask& mask, std::uint8_t keep) {
    Video out = v;
    for (size_t i = 0; i < mask.fg.size(); ++i) {
        if (mask.fg[i] != keep) {
            for (size_t c = 0; c < 3; ++c) {
                out.pixels[i * 3 + c] = 0.5f;
            }
        }
    }
    return out;
}

double consecutive_cosine(const Video& v, const Embedder& e) {
    double sum = 0.0;
    auto prev = e.embed_image(v, 0);
    for (int f = 1; f < v.frames; ++f) {
        auto cur = e.embed_image(v, f);
        sum += cosine(prev, cur);
        prev = std::move(cur);
    }
    return std::clamp(sum / (v.frames - 1), 0.0, 1.0);
}

}  // namespace

ToyClipEmbedder::ToyClipEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    require(dim > 0, ErrorKind::config, "embedder dimension must be positive");
    GaussianStream rng(mix_seed(seed, 0x1a6e));
    projection_.resize(static_cast<size_t>(kGrid * kGrid * 3) * dim);
    for (double& p : projection_) {
        p = rng.next();
    }
}

std::vector<double> ToyClipEmbedder::embed_image(const Video& video, int frame) const {
    require(frame >= 0 && frame < video.frames, ErrorKind::config, "embed_image: frame out of range");
    require(video.height >= kGrid && video.width >= kGrid, ErrorKind::config, "embed_image: frame smaller than 8x8");
    std::vector<double> feat(static_cast<size_t>(kGrid * kGrid * 3), 0.0);
    for (int r = 0; r < kGrid; ++r) {
        const int y0 = r * video.height / kGrid;
        const int y1 = (r + 1) * video.height / kGrid;
        for (int c = 0; c < kGrid; ++c) {
            const int x0 = c * video.width / kGrid;
            const int x1 = (c + 1) * video.width / kGrid;
            const double inv = 1.0 / ((y1 - y0) * (x1 - x0));
            for (int ch = 0; ch < 3; ++ch) {
                double s = 0.0;
                for (int y = y0; y < y1; ++y) {
                    for (int x = x0; x < x1; ++x) {
                        s += video.at(frame, y, x, ch);
                    }
                }
                feat[static_cast<size_t>((r * kGrid + c) * 3 + ch)] = s * inv - 0.5;
            }
        }
    }
    std::vector<double> out(static_cast<size_t>(dim_), 0.0);
    for (size_t i = 0; i < feat.size(); ++i) {
        const double* row = &projection_[i * static_cast<size_t>(dim_)];
        for (int j = 0; j < dim_; ++j) {
            out[static_cast<size_t>(j)] += feat[i] * row[j];
        }
    }
    normalize_or_axis(out);
    return out;
}

std::vector<double> ToyClipEmbedder::embed_text(std::string_view text) const {
    std::vector<double> out(static_cast<size_t>(dim_), 0.0);
    for (const auto& token : tokenize(text)) {
        GaussianStream rng(mix_seed(seed_, fnv1a64(token)));
        for (double& x : out) {
            x += rng.next();
        }
    }
    normalize_or_axis(out);
    return out;
}

std::string ToyClipEmbedder::tag() const {
    return "toy-clip" + std::to_string(dim_) + "-v1";
}

DirectionScore clip_dir(const Video& src, const Video& trg, std::string_view src_text, std::string_view trg_text,
                        const Embedder& embedder) {
    require(src.frames > 0 && trg.frames > 0, ErrorKind::config, "clip_dir: empty frame list");
    return direction_cosine(embedder.embed_text(src_text), embedder.embed_text(trg_text),
                            mean_frame_embedding(src, embedder), mean_frame_embedding(trg, embedder));
}

double clip_img(const Video& src, const Video& trg, const Embedder& embedder) {
    require(src.frames == trg.frames, ErrorKind::config,
            "clip_img: frame counts differ (" + std::to_string(src.frames) + " vs " + std::to_string(trg.frames) + ")");
    require(src.frames > 0, ErrorKind::config, "clip_img: empty frame list");
    double sum = 0.0;
    for (int f = 0; f < src.frames; ++f) {
        sum += cosine(embedder.embed_image(src, f), embedder.embed_image(trg, f));
    }
    return sum / src.frames;
}

TemporalScores temporal_metrics(const Video& video, const Embedder& embedder, const RegionMask* regions) {
    require(video.frames >= 3, ErrorKind::domain,
            "temporal metrics need at least 3 frames, got " + std::to_string(video.frames));
    const size_t fs = video.frame_size();
    double first = 0.0;
    for (int f = 1; f < video.frames; ++f) {
        const float* a = &video.pixels[static_cast<size_t>(f - 1) * fs];
        const float* b = &video.pixels[static_cast<size_t>(f) * fs];
        for (size_t i = 0; i < fs; ++i) {
            first += std::abs(static_cast<double>(b[i]) - a[i]);
        }
    }
    double second = 0.0;
    for (int f = 1; f + 1 < video.frames; ++f) {
        const float* a = &video.pixels[static_cast<size_t>(f - 1) * fs];
        const float* b = &video.pixels[static_cast<size_t>(f) * fs];
        const float* c = &video.pixels[static_cast<size_t>(f + 1) * fs];
        for (size_t i = 0; i < fs; ++i) {
            second += std::abs(static_cast<double>(c[i]) - 2.0 * b[i] + a[i]);
        }
    }
    TemporalScores s;
    s.tf = std::clamp(1.0 - first / (static_cast<double>(fs) * (video.frames - 1)), 0.0, 1.0);
    s.ms = std::clamp(1.0 - second / (2.0 * static_cast<double>(fs) * (video.frames - 2)), 0.0, 1.0);
    if (regions != nullptr && !regions->degenerate()) {
        require(regions->matches(video), ErrorKind::config, "temporal metrics: region mask does not match the video");
        s.sc = consecutive_cosine(masked_copy(video, *regions, 1), embedder);
        s.bc = consecutive_cosine(masked_copy(video, *regions, 0), embedder);
    } else {
        s.sc = consecutive_cosine(video, embedder);
        s.bc = s.sc;
    }
    return s;
}

double overall_score(const OverallInputs& in) {
    std::string missing;
    auto need = [&](const std::optional<double>& v, const char* name) {
        if (!v) {
            missing += (missing.empty() ? "" : ", ") + std::string(name);
        }
    };
    need(in.clip_all, "clip_all");
    need(in.tf, "tf");
    need(in.ms, "ms");
    need(in.sc, "sc");
    need(in.bc, "bc");
    require(missing.empty(), ErrorKind::missing_data, "overall score: missing " + missing);
    return overall_score(*in.clip_all, *in.tf, *in.ms, *in.sc, *in.bc);
}

double overall_score(double clip_all, double tf, double ms, double sc, double bc) {
    return clip_all * tf * ms * sc * bc;
}

SampleMetrics evaluate_pair(const RunPair& pair, const Embedder& embedder) {
    require(pair.src != nullptr && pair.trg != nullptr, ErrorKind::missing_data, "evaluate: missing video");
    SampleMetrics m;
    m.src_prompt = pair.src_prompt;
    m.trg_prompt = pair.trg_prompt;
    const DirectionScore d = clip_dir(*pair.src, *pair.trg, pair.src_prompt, pair.trg_prompt, embedder);
    m.clip_dir = d.value;
    m.clip_dir_degenerate = d.degenerate;
    m.clip_img = clip_img(*pair.src, *pair.trg, embedder);
    const TemporalScores t = temporal_metrics(*pair.trg, embedder, pair.regions);
    m.tf = t.tf;
    m.ms = t.ms;
    m.sc = t.sc;
    m.bc = t.bc;
    return m;
}

MetricReport evaluate_runs(const std::vector<RunPair>& pairs, const Embedder& embedder, ClipAllOrder order) {
    require(!pairs.empty(), ErrorKind::missing_data, "evaluate: no run pairs");
    MetricReport r;
    r.order = order;
    r.embedder = embedder.tag();
    double products = 0.0;
    for (const auto& p : pairs) {
        r.samples.push_back(evaluate_pair(p, embedder));
    }
    const double n = static_cast<double>(pairs.size());
    for (const auto& s : r.samples) {
        r.clip_dir += s.clip_dir / n;
        r.clip_img += s.clip_img / n;
        r.tf += s.tf / n;
        r.ms += s.ms / n;
        r.sc += s.sc / n;
        r.bc += s.bc / n;
        products += s.clip_dir * s.clip_img / n;
    }
    r.clip_all = order == ClipAllOrder::product_of_means ? r.clip_dir * r.clip_img : products;
    r.overall = overall_score(r.clip_all, r.tf, r.ms, r.sc, r.bc);
    return r;
}

MetricReport evaluate_run(const Video& src, const Video& trg, const std::string& src_prompt,
                          const std::string& trg_prompt, const Embedder& embedder, const RegionMask* regions) {
    return evaluate_runs({RunPair{&src, &trg, src_prompt, trg_prompt, regions}}, embedder);
}

}  // namespace kvedit
