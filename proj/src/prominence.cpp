// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvedit/prominence.hpp"

#include "kvedit/error.hpp"
#include "kvedit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace kvedit {

size_t RegionMask::foreground() const {
    return static_cast<size_t>(std::count(fg.begin(), fg.end(), std::uint8_t{1}));
}

RegionMask RegionMask::complement() const {
    RegionMask out = *this;
    for (auto& v : out.fg) {
        v = v ? 0 : 1;
    }
    return out;
}

double psnr_region(const Video& a, const Video& b, const RegionMask& mask, Region region, double cap) {
    require(a.same_shape(b), ErrorKind::config, "psnr: video shapes differ");
    require(mask.matches(a), ErrorKind::config, "psnr: mask shape does not match the video");
    const std::uint8_t want = region == Region::fg ? 1 : 0;
    double sum = 0.0;
    size_t count = 0;
    for (size_t i = 0; i < mask.fg.size(); ++i) {
        if (mask.fg[i] != want) {
            continue;
        }
        for (size_t c = 0; c < 3; ++c) {
            const double d = static_cast<double>(a.pixels[i * 3 + c]) - b.pixels[i * 3 + c];
            sum += d * d;
        }
        ++count;
    }
    require(count > 0, ErrorKind::degenerate_region,
            std::string("psnr: ") + (region == Region::fg ? "foreground" : "background") + " region is empty");
    const double mse = sum / (3.0 * static_cast<double>(count));
    if (mse == 0.0) {
        return cap;
    }
    return std::min(cap, -10.0 * std::log10(mse));
}

double normalized_similarity(double psnr, double psnr_min, double psnr_max, double c) {
    require(c > 0.0, ErrorKind::config, "normalized similarity: C must be positive");
    require(psnr >= psnr_min, ErrorKind::domain,
            "normalized similarity: psnr " + std::to_string(psnr) + " below psnr_min " + std::to_string(psnr_min));
    require(psnr_max >= 0.0, ErrorKind::domain, "normalized similarity: psnr_max must be non-negative");
    return 1.0 - std::pow(10.0, -(psnr - psnr_min) * (psnr_max / c));
}

double prominence(double s_fg, double s_bg) {
    require(s_fg >= 0.0 && s_fg <= 1.0 && s_bg >= 0.0 && s_bg <= 1.0, ErrorKind::domain,
            "prominence: similarities must lie in [0, 1], got S_fg=" + std::to_string(s_fg) +
                " S_bg=" + std::to_string(s_bg));
    return s_bg * (1.0 - s_fg);
}

namespace {

bool excluded(const ProminenceReport& r, int layer) {
    return std::find(r.excluded_layers.begin(), r.excluded_layers.end(), layer) != r.excluded_layers.end();
}

std::pair<double, double> min_max(const ProminenceReport& r, const std::vector<double>& fg,
                                  const std::vector<double>& bg) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (size_t l = 0; l < fg.size(); ++l) {
        if (excluded(r, static_cast<int>(l))) {
            continue;
        }
        lo = std::min({lo, fg[l], bg[l]});
        hi = std::max({hi, fg[l], bg[l]});
    }
    return {lo, hi};
}

}  // namespace

void recompute_prominence(ProminenceReport& r) {
    const size_t n_layers = r.psnr_fg.size();
    require(r.psnr_bg.size() == n_layers && n_layers > 0, ErrorKind::missing_data, "prominence report has no layers");
    require(r.excluded_layers.size() < n_layers, ErrorKind::degenerate_region, "every layer is excluded");
    std::tie(r.psnr_min, r.psnr_max) = min_max(r, r.psnr_fg, r.psnr_bg);

    r.s_fg.assign(n_layers, 0.0);
    r.s_bg.assign(n_layers, 0.0);
    r.p.assign(n_layers, 0.0);
    if (r.per_prompt) {
        const double n = static_cast<double>(r.included_prompts.size());
        for (int p : r.included_prompts) {
            const auto& fg = r.psnr_fg_prompt[static_cast<size_t>(p)];
            const auto& bg = r.psnr_bg_prompt[static_cast<size_t>(p)];
            const auto [lo, hi] = min_max(r, fg, bg);
            for (size_t l = 0; l < n_layers; ++l) {
                if (!excluded(r, static_cast<int>(l))) {
                    r.s_fg[l] += normalized_similarity(fg[l], lo, hi, r.c) / n;
                    r.s_bg[l] += normalized_similarity(bg[l], lo, hi, r.c) / n;
                }
            }
        }
    } else {
        for (size_t l = 0; l < n_layers; ++l) {
            if (!excluded(r, static_cast<int>(l))) {
                r.s_fg[l] = normalized_similarity(r.psnr_fg[l], r.psnr_min, r.psnr_max, r.c);
                r.s_bg[l] = normalized_similarity(r.psnr_bg[l], r.psnr_min, r.psnr_max, r.c);
            }
        }
    }
    r.selected_layer = -1;
    for (size_t l = 0; l < n_layers; ++l) {
        if (excluded(r, static_cast<int>(l))) {
            continue;
        }
        r.p[l] = prominence(std::clamp(r.s_fg[l], 0.0, 1.0), std::clamp(r.s_bg[l], 0.0, 1.0));
        if (r.selected_layer < 0 || r.p[l] > r.p[static_cast<size_t>(r.selected_layer)]) {
            r.selected_layer = static_cast<int>(l);
        }
    }
}

bool self_consistent(const ProminenceReport& report) {
    ProminenceReport copy = report;
    recompute_prominence(copy);
    return copy.psnr_min == report.psnr_min && copy.psnr_max == report.psnr_max && copy.s_fg == report.s_fg &&
           copy.s_bg == report.s_bg && copy.p == report.p && copy.selected_layer == report.selected_layer;
}

RegionMask FixedMaskProvider::mask(const Video& original, const std::string& /*prompt*/, int index) const {
    require(index >= 0 && index < static_cast<int>(masks_.size()), ErrorKind::missing_data,
            "no foreground mask for prompt " + std::to_string(index));
    const RegionMask& m = masks_[static_cast<size_t>(index)];
    require(m.matches(original), ErrorKind::config,
            "foreground mask for prompt " + std::to_string(index) + " does not match the video shape");
    return m;
}

RegionMask LuminanceMaskProvider::mask(const Video& original, const std::string& /*prompt*/, int /*index*/) const {
    RegionMask m(original.frames, original.height, original.width);
    const double n = static_cast<double>(original.height) * original.width;
    for (int f = 0; f < original.frames; ++f) {
        double sum = 0.0;
        double sq = 0.0;
        for (int y = 0; y < original.height; ++y) {
            for (int x = 0; x < original.width; ++x) {
                const double v = luminance(original, f, y, x);
                sum += v;
                sq += v * v;
            }
        }
        const double mean = sum / n;
        const double sd = std::sqrt(std::max(0.0, sq / n - mean * mean));
        if (sd == 0.0) {
            continue;
        }
        for (int y = 0; y < original.height; ++y) {
            for (int x = 0; x < original.width; ++x) {
                m.at(f, y, x) = luminance(original, f, y, x) > mean + k_ * sd ? 1 : 0;
            }
        }
    }
    return m;
}

std::string LuminanceMaskProvider::tag() const {
    return "luminance(k=" + std::to_string(k_) + ")";
}

ProminenceReport build_prominence_report(const std::vector<Video>& originals,
                                         const std::vector<std::vector<std::optional<Video>>>& rope_probes,
                                         const std::vector<std::string>& prompts,
                                         const ForegroundProvider& provider, const ProminenceOptions& options) {
    require(!originals.empty() && rope_probes.size() == originals.size() && prompts.size() == originals.size(),
            ErrorKind::missing_data, "prominence needs one original, one probe row and one prompt per prompt index");
    const size_t n_layers = rope_probes.front().size();
    require(n_layers > 0, ErrorKind::missing_data, "prominence needs at least one probed layer");

    ProminenceReport r;
    r.per_prompt = options.per_prompt;
    r.c = options.c;
    r.psnr_cap = options.psnr_cap;
    r.psnr_fg_prompt.assign(originals.size(), std::vector<double>(n_layers, 0.0));
    r.psnr_bg_prompt.assign(originals.size(), std::vector<double>(n_layers, 0.0));

    std::vector<RegionMask> masks(originals.size());
    for (size_t p = 0; p < originals.size(); ++p) {
        masks[p] = provider.mask(originals[p], prompts[p], static_cast<int>(p));
        if (masks[p].degenerate()) {
            r.notes.push_back("prompt " + std::to_string(p) + " excluded: degenerate foreground mask");
        } else {
            r.included_prompts.push_back(static_cast<int>(p));
        }
    }
    require(!r.included_prompts.empty(), ErrorKind::degenerate_region, "every foreground mask is degenerate");

    for (size_t l = 0; l < n_layers; ++l) {
        const bool complete = std::all_of(r.included_prompts.begin(), r.included_prompts.end(), [&](int p) {
            const auto& row = rope_probes[static_cast<size_t>(p)];
            return row.size() == n_layers && row[l].has_value();
        });
        if (!complete) {
            r.excluded_layers.push_back(static_cast<int>(l));
            r.notes.push_back("layer " + std::to_string(l) + " excluded: missing probe video");
        }
    }

    r.psnr_fg.assign(n_layers, 0.0);
    r.psnr_bg.assign(n_layers, 0.0);
    const double n = static_cast<double>(r.included_prompts.size());
    for (size_t l = 0; l < n_layers; ++l) {
        if (excluded(r, static_cast<int>(l))) {
            continue;
        }
        for (int pi : r.included_prompts) {
            const auto p = static_cast<size_t>(pi);
            const Video& probe = *rope_probes[p][l];
            r.psnr_fg_prompt[p][l] = psnr_region(originals[p], probe, masks[p], Region::fg, r.psnr_cap);
            r.psnr_bg_prompt[p][l] = psnr_region(originals[p], probe, masks[p], Region::bg, r.psnr_cap);
            r.psnr_fg[l] += r.psnr_fg_prompt[p][l] / n;
            r.psnr_bg[l] += r.psnr_bg_prompt[p][l] / n;
        }
    }
    recompute_prominence(r);
    return r;
}

Scene synthesize_scene(const SceneSpec& spec, std::uint64_t seed) {
    require(spec.frames > 0 && spec.height > 0 && spec.width > 0, ErrorKind::spec, "scene: frame dimensions must be positive");
    require(spec.size > 0.0, ErrorKind::spec, "scene: shape size must be positive");
    for (int f = 0; f < spec.frames; ++f) {
        const double x = spec.x0 + spec.vx * f;
        const double y = spec.y0 + spec.vy * f;
        require(x >= 0.0 && y >= 0.0 && x + spec.size <= spec.width && y + spec.size <= spec.height, ErrorKind::spec,
                "scene: shape leaves the " + std::to_string(spec.width) + "x" + std::to_string(spec.height) +
                    " frame at frame " + std::to_string(f));
    }

    // background: a few seeded plane waves around a muted base colour
    GaussianStream rng(mix_seed(seed, 0x5cefe));
    struct Wave {
        double kx, ky, phase;
        float gain[3];
    };
    std::vector<Wave> waves(3);
    for (auto& w : waves) {
        w.kx = (rng.uniform() - 0.5) * 0.8;
        w.ky = (rng.uniform() - 0.5) * 0.8;
        w.phase = rng.uniform() * 2.0 * std::numbers::pi;
        for (float& g : w.gain) {
            g = static_cast<float>(0.5 + rng.uniform());
        }
    }
    const float base[3] = {0.35f, 0.5f, 0.4f};

    Scene scene{Video(spec.frames, spec.height, spec.width), RegionMask(spec.frames, spec.height, spec.width)};
    for (int f = 0; f < spec.frames; ++f) {
        const double bx = spec.x0 + spec.vx * f;
        const double by = spec.y0 + spec.vy * f;
        const double r = spec.size / 2.0;
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                const double cx = x + 0.5;
                const double cy = y + 0.5;
                bool inside = false;
                if (spec.shape == SceneShape::square) {
                    inside = cx >= bx && cx < bx + spec.size && cy >= by && cy < by + spec.size;
                } else {
                    inside = std::hypot(cx - (bx + r), cy - (by + r)) <= r;
                }
                scene.mask.at(f, y, x) = inside ? 1 : 0;
                for (int c = 0; c < 3; ++c) {
                    float v = spec.fg_color[c];
                    if (!inside) {
                        double t = 0.0;
                        for (const auto& w : waves) {
                            t += w.gain[c] * std::sin(w.kx * x + w.ky * y + w.phase);
                        }
                        v = base[c] + static_cast<float>(spec.texture * t / waves.size());
                    }
                    scene.video.at(f, y, x, c) = std::clamp(v, 0.0f, 1.0f);
                }
            }
        }
    }
    return scene;
}

}  // namespace kvedit
