// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kvedit/video.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace kvedit {

/// Per-frame binary foreground mask at pixel resolution.
struct RegionMask {
    int frames = 0;
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> fg;  // 1 = foreground, [F][H][W]

    RegionMask() = default;
    RegionMask(int f, int h, int w) : frames(f), height(h), width(w), fg(static_cast<size_t>(f) * h * w, 0) {}

    std::uint8_t& at(int f, int y, int x) { return fg[(static_cast<size_t>(f) * height + y) * width + x]; }
    std::uint8_t at(int f, int y, int x) const { return fg[(static_cast<size_t>(f) * height + y) * width + x]; }

    size_t foreground() const;
    size_t background() const { return fg.size() - foreground(); }
    /// Needs at least one pixel on each side.
    bool degenerate() const { return foreground() == 0 || background() == 0; }
    RegionMask complement() const;
    bool matches(const Video& v) const { return frames == v.frames && height == v.height && width == v.width; }
    bool operator==(const RegionMask&) const = default;
};

enum class Region { fg, bg };

inline constexpr double kPsnrCap = 100.0;
inline constexpr double kDefaultProminenceC = 400.0;

/// MSE pooled over every masked pixel and channel, one dB conversion, peak 1.
/// Zero error returns `cap`.
double psnr_region(const Video& a, const Video& b, const RegionMask& mask, Region region, double cap = kPsnrCap);

/// S = 1 - 10^(-(psnr - psnr_min) * psnr_max / C).
double normalized_similarity(double psnr, double psnr_min, double psnr_max, double c);

/// P = S_bg * (1 - S_fg).
double prominence(double s_fg, double s_bg);

struct ProminenceReport {
    bool per_prompt = false;  // min/max taken per prompt instead of globally
    double c = kDefaultProminenceC;
    double psnr_cap = kPsnrCap;
    std::vector<std::vector<double>> psnr_fg_prompt;  // [prompt][layer]
    std::vector<std::vector<double>> psnr_bg_prompt;
    std::vector<double> psnr_fg;  // per layer, mean over prompts
    std::vector<double> psnr_bg;
    double psnr_min = 0.0;
    double psnr_max = 0.0;
    std::vector<double> s_fg;
    std::vector<double> s_bg;
    std::vector<double> p;
    int selected_layer = -1;
    std::vector<int> included_prompts;
    std::vector<int> excluded_layers;
    std::vector<std::string> notes;
};

/// Recomputes min/max, S and P from the stored PSNRs in place.
void recompute_prominence(ProminenceReport& report);

/// True when S, P and the argmax reproduce bit-exactly from the stored PSNRs.
bool self_consistent(const ProminenceReport& report);

/// Supplies the foreground region of an original video.
class ForegroundProvider {
public:
    virtual ~ForegroundProvider() = default;
    virtual RegionMask mask(const Video& original, const std::string& prompt, int index) const = 0;
    virtual std::string tag() const = 0;
};

/// Ground-truth masks handed in up front, one per prompt index.
class FixedMaskProvider final : public ForegroundProvider {
public:
    explicit FixedMaskProvider(std::vector<RegionMask> masks) : masks_(std::move(masks)) {}
    RegionMask mask(const Video& original, const std::string& prompt, int index) const override;
    std::string tag() const override { return "fixed"; }

private:
    std::vector<RegionMask> masks_;
};

/// Foreground = pixels whose luminance exceeds the frame mean by `k` standard deviations.
class LuminanceMaskProvider final : public ForegroundProvider {
public:
    explicit LuminanceMaskProvider(double k = 0.5) : k_(k) {}
    RegionMask mask(const Video& original, const std::string& prompt, int index) const override;
    std::string tag() const override;

private:
    double k_;
};

struct ProminenceOptions {
    double c = kDefaultProminenceC;
    double psnr_cap = kPsnrCap;
    bool per_prompt = false;
};

/// Reuses a RoPE-drop sweep: per-layer region PSNRs against each original, then
/// S and P curves. Prompts with degenerate masks and layers with missing probes
/// are excluded and noted.
ProminenceReport build_prominence_report(const std::vector<Video>& originals,
                                         const std::vector<std::vector<std::optional<Video>>>& rope_probes,
                                         const std::vector<std::string>& prompts,
                                         const ForegroundProvider& provider, const ProminenceOptions& options = {});

enum class SceneShape { square, disc };

/// A solid foreground shape moving linearly over a smooth textured background.
struct SceneSpec {
    int frames = 5;
    int height = 32;
    int width = 32;
    SceneShape shape = SceneShape::square;
    double size = 10.0;          // side or diameter in pixels
    double x0 = 6.0;             // top-left of the shape's bounding box at frame 0
    double y0 = 10.0;
    double vx = 2.0;             // pixels per frame
    double vy = 0.0;
    float fg_color[3] = {0.85f, 0.3f, 0.25f};
    double texture = 0.08;       // background texture amplitude
};

struct Scene {
    Video video;
    RegionMask mask;
};

/// Deterministic in (spec, seed). Throws ErrorKind::spec if the shape leaves the frame.
Scene synthesize_scene(const SceneSpec& spec, std::uint64_t seed);

}  // namespace kvedit
