// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvedit/probe.hpp"

#include "kvedit/error.hpp"
#include "kvedit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace kvedit {

std::string_view probe_mode_name(ProbeMode mode) {
    return mode == ProbeMode::bypass ? "bypass" : "rope_drop";
}

const std::vector<std::string>& bundled_prompts() {
    static const std::vector<std::string> prompts = {
        "A lion slowly walking across the savannah during a golden hour sunset",
        "A red fox trotting through fresh snow in a pine forest",
        "A sailboat gliding across a calm blue lake at noon",
        "A chef flipping pancakes in a busy restaurant kitchen",
        "A hummingbird hovering beside a bright pink flower",
        "A vintage car driving along a coastal highway",
        "A girl riding a bicycle down a tree lined street",
        "A waterfall pouring into a misty green canyon",
        "An astronaut floating slowly inside a space station",
        "A golden retriever catching a frisbee on the beach",
        "A hot air balloon rising over rolling hills at dawn",
        "A street musician playing violin in a rainy plaza",
        "A sea turtle swimming above a colorful coral reef",
        "A train crossing a stone bridge in the mountains",
        "A cat stretching on a sunny windowsill",
        "A surfer riding a large wave at sunset",
        "A panda eating bamboo in a quiet grove",
        "A lighthouse beam sweeping across a stormy sea",
        "A child building a sandcastle near the shoreline",
        "A horse galloping across an open prairie",
        "A candle flickering on a wooden table at night",
        "A butterfly landing on a purple lavender stem",
        "A skateboarder performing a trick in an empty park",
        "A flock of geese flying over a frozen river",
        "A potter shaping clay on a spinning wheel",
        "A squirrel gathering acorns under an oak tree",
        "A jellyfish drifting through dark blue water",
        "A windmill turning slowly in a tulip field",
        "A dancer spinning on a dimly lit stage",
        "A rabbit hopping through a field of clover",
        "A glass of water being filled from a pitcher",
        "A kite soaring high above a grassy hill",
        "A bear fishing for salmon in a rushing river",
        "A city skyline with traffic moving at dusk",
        "A dragonfly resting on a reed by the pond",
        "A campfire crackling under a starry sky",
        "A penguin sliding on its belly across the ice",
        "An owl turning its head on a moonlit branch",
        "A fisherman casting a line from a small wooden boat",
        "A paper boat floating down a rain filled gutter",
    };
    return prompts;
}

void PromptSet::validate() const {
    require(!prompts.empty(), ErrorKind::config, "prompt set is empty");
    require(seeds.size() == prompts.size(), ErrorKind::config, "prompt set needs one seed per prompt");
    std::set<std::string> unique(prompts.begin(), prompts.end());
    require(unique.size() == prompts.size(), ErrorKind::config, "prompt set contains duplicate prompts");
}

PromptSet PromptSet::bundled(int n, std::uint64_t base_seed) {
    const auto& all = bundled_prompts();
    require(n > 0 && n <= static_cast<int>(all.size()), ErrorKind::config,
            "bundled prompt set holds " + std::to_string(all.size()) + " prompts, requested " + std::to_string(n));
    PromptSet set;
    for (int i = 0; i < n; ++i) {
        set.prompts.push_back(all[static_cast<size_t>(i)]);
        set.seeds.push_back(base_seed + static_cast<std::uint64_t>(i));
    }
    return set;
}

std::vector<double> ToyPerceptualEmbedder::embed(const Video& video) const {
    require(video.frames > 0 && video.height >= grid_ && video.width >= grid_, ErrorKind::config,
            "perceptual embedder needs frames of at least " + std::to_string(grid_) + "x" + std::to_string(grid_));
    const size_t cells = static_cast<size_t>(grid_) * grid_;
    std::vector<double> acc(cells + 3, 0.0);
    std::vector<double> frame_feat(cells + 3);
    for (int f = 0; f < video.frames; ++f) {
        std::fill(frame_feat.begin(), frame_feat.end(), 0.0);
        for (int r = 0; r < grid_; ++r) {
            const int y0 = r * video.height / grid_;
            const int y1 = (r + 1) * video.height / grid_;
            for (int c = 0; c < grid_; ++c) {
                const int x0 = c * video.width / grid_;
                const int x1 = (c + 1) * video.width / grid_;
                double sum = 0.0;
                for (int y = y0; y < y1; ++y) {
                    for (int x = x0; x < x1; ++x) {
                        sum += luminance(video, f, y, x);
                    }
                }
                frame_feat[static_cast<size_t>(r) * grid_ + c] = sum / ((y1 - y0) * (x1 - x0));
            }
        }
        const double grid_mean =
            std::accumulate(frame_feat.begin(), frame_feat.begin() + static_cast<ptrdiff_t>(cells), 0.0) / cells;
        for (size_t i = 0; i < cells; ++i) {
            frame_feat[i] -= grid_mean;
        }
        for (int y = 0; y < video.height; ++y) {
            for (int x = 0; x < video.width; ++x) {
                for (int ch = 0; ch < 3; ++ch) {
                    frame_feat[cells + static_cast<size_t>(ch)] += video.at(f, y, x, ch);
                }
            }
        }
        for (int ch = 0; ch < 3; ++ch) {
            frame_feat[cells + static_cast<size_t>(ch)] =
                frame_feat[cells + static_cast<size_t>(ch)] / (static_cast<double>(video.height) * video.width) - 0.5;
        }
        for (size_t i = 0; i < acc.size(); ++i) {
            acc[i] += frame_feat[i];
        }
    }
    double norm = 0.0;
    for (double& v : acc) {
        v /= video.frames;
        norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        // featureless video: fixed unit direction
        std::fill(acc.begin(), acc.end(), 0.0);
        acc[0] = 1.0;
        return acc;
    }
    for (double& v : acc) {
        v /= norm;
    }
    return acc;
}

std::string ToyPerceptualEmbedder::tag() const {
    return "toy-luma" + std::to_string(grid_) + "-v1";
}

double cosine(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorKind::config,
            "embedding dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    // identical inputs give dot == na == nb and an exact 1
    return dot / std::sqrt(na * nb);
}

size_t ProbeSweep::video_count() const {
    size_t n = originals.size();
    for (const auto& row : probes) {
        n += static_cast<size_t>(std::count_if(row.begin(), row.end(), [](const auto& v) { return v.has_value(); }));
    }
    return n;
}

ProbeSweep run_probe_sweep(const Pipeline& pipe, ProbeMode mode, const PromptSet& prompts, int workers) {
    prompts.validate();
    const int n_layers = pipe.model().config().num_layers;
    const size_t n_prompts = prompts.size();

    ProbeSweep sweep;
    sweep.mode = mode;
    sweep.num_layers = n_layers;
    sweep.originals.resize(n_prompts);
    sweep.probes.assign(n_prompts, std::vector<std::optional<Video>>(static_cast<size_t>(n_layers)));

    std::mutex failure_mutex;
    const size_t cells_per_prompt = static_cast<size_t>(n_layers) + 1;
    parallel_for(n_prompts * cells_per_prompt, workers, [&](size_t cell) {
        const size_t p = cell / cells_per_prompt;
        const int layer = static_cast<int>(cell % cells_per_prompt) - 1;
        HookMap hooks;
        if (layer >= 0) {
            LayerHooks& h = hooks[layer];
            (mode == ProbeMode::bypass ? h.bypass : h.rope_drop_key) = true;
        }
        try {
            SampleResult r = sample(pipe, prompts.prompts[p], prompts.seeds[p], [&hooks](int) { return hooks; });
            if (layer < 0) {
                sweep.originals[p] = std::move(r.video);
            } else {
                sweep.probes[p][static_cast<size_t>(layer)] = std::move(r.video);
            }
        } catch (const std::exception& e) {
            std::lock_guard lock(failure_mutex);
            sweep.failures.push_back({static_cast<int>(p), layer, e.what()});
        }
    });
    std::sort(sweep.failures.begin(), sweep.failures.end(),
              [](const ProbeFailure& a, const ProbeFailure& b) { return std::tie(a.prompt, a.layer) < std::tie(b.prompt, b.layer); });
    return sweep;
}

std::vector<double> vitality_score(const std::vector<Video>& originals,
                                   const std::vector<std::vector<std::optional<Video>>>& probes,
                                   const PerceptualEmbedder& embedder) {
    require(!originals.empty(), ErrorKind::missing_data, "vitality needs at least one original video");
    require(probes.size() == originals.size(), ErrorKind::missing_data,
            "probe grid has " + std::to_string(probes.size()) + " prompts, originals " +
                std::to_string(originals.size()));
    const size_t n_layers = probes.front().size();
    std::string missing;
    for (size_t p = 0; p < probes.size(); ++p) {
        const bool original_ok = originals[p].frames > 0;
        for (size_t l = 0; l < n_layers; ++l) {
            if (!original_ok || probes[p].size() != n_layers || !probes[p][l]) {
                missing += (missing.empty() ? "" : ", ") + std::string("(prompt ") + std::to_string(p) + ", layer " +
                           std::to_string(l) + ")";
            }
        }
    }
    require(missing.empty(), ErrorKind::missing_data, "missing probes: " + missing);

    std::vector<std::vector<double>> base(originals.size());
    for (size_t p = 0; p < originals.size(); ++p) {
        base[p] = embedder.embed(originals[p]);
    }
    std::vector<double> vitality(n_layers);
    for (size_t l = 0; l < n_layers; ++l) {
        double sum = 0.0;
        for (size_t p = 0; p < originals.size(); ++p) {
            sum += cosine(base[p], embedder.embed(*probes[p][l]));
        }
        vitality[l] = 1.0 - sum / static_cast<double>(originals.size());
    }
    return vitality;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), ErrorKind::domain,
            "pearson: length mismatch " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
    require(x.size() >= 2, ErrorKind::domain, "pearson: need at least two samples");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    require(sxx > 0.0 && syy > 0.0, ErrorKind::undefined_correlation, "pearson: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

VitalityReport build_vitality_report(const ProbeSweep& bypass, const ProbeSweep& rope,
                                     const PerceptualEmbedder& embedder) {
    require(bypass.mode == ProbeMode::bypass && rope.mode == ProbeMode::rope_drop, ErrorKind::config,
            "vitality report needs one bypass and one rope_drop sweep");
    VitalityReport report;
    report.vitality_layer = vitality_score(bypass.originals, bypass.probes, embedder);
    report.vitality_rope = vitality_score(rope.originals, rope.probes, embedder);
    report.n_prompts = static_cast<int>(rope.originals.size());
    report.embedder = embedder.tag();
    try {
        report.pearson_r = pearson(report.vitality_layer, report.vitality_rope);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::undefined_correlation) {
            throw;
        }
    }
    return report;
}

namespace {

std::vector<int> ranked_layers(const std::vector<double>& score, bool descending) {
    std::vector<int> order(score.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return descending ? score[static_cast<size_t>(a)] > score[static_cast<size_t>(b)]
                          : score[static_cast<size_t>(a)] < score[static_cast<size_t>(b)];
    });
    return order;
}

std::vector<int> select_layers(const VitalityReport& report, const LayerSelection& sel, bool vital) {
    const auto& score = report.vitality_rope;
    const int n = static_cast<int>(score.size());
    std::vector<int> out;
    switch (sel.kind) {
        case LayerSelection::Kind::explicit_list:
            for (int l : sel.layers) {
                require(l >= 0 && l < n, ErrorKind::config,
                        "explicit layer " + std::to_string(l) + " outside 0.." + std::to_string(n - 1));
            }
            out = sel.layers;
            break;
        case LayerSelection::Kind::top_k: {
            require(sel.k > 0 && sel.k <= n, ErrorKind::config,
                    "k = " + std::to_string(sel.k) + " is outside 1.." + std::to_string(n));
            const auto order = ranked_layers(score, vital);
            out.assign(order.begin(), order.begin() + sel.k);
            break;
        }
        case LayerSelection::Kind::threshold:
            for (int l = 0; l < n; ++l) {
                const double v = score[static_cast<size_t>(l)];
                if (vital ? v >= sel.threshold : v < sel.threshold) {
                    out.push_back(l);
                }
            }
            break;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

std::vector<int> select_vital_layers(const VitalityReport& report, const LayerSelection& selection) {
    return select_layers(report, selection, true);
}

std::vector<int> select_non_vital_layers(const VitalityReport& report, const LayerSelection& selection) {
    return select_layers(report, selection, false);
}

const std::vector<int>& backbone_vital_layers() {
    static const std::vector<int> layers = {0, 1, 10, 11, 12, 14, 15, 17, 19, 23};
    return layers;
}

const std::vector<int>& backbone_non_vital_layers() {
    static const std::vector<int> layers = {16, 24, 25, 27, 28, 29, 30, 31, 32, 33, 34, 35, 36, 37, 38, 39, 40, 41};
    return layers;
}

}  // namespace kvedit
