// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kvedit/tensor.hpp"

#include <cstddef>
#include <vector>

namespace kvedit {

/// Visual latent: one row per grid token (canonical order), one column per channel.
struct LatentVideo {
    LatentGrid grid;
    Matrix data;

    LatentVideo() = default;
    LatentVideo(LatentGrid g, int channels) : grid(g), data(Matrix::Zero(g.tokens(), channels)) {}
    LatentVideo(LatentGrid g, Matrix d) : grid(g), data(std::move(d)) {}

    int channels() const { return static_cast<int>(data.cols()); }
};

/// RGB frames in [0, 1], stored [frame][row][col][channel].
struct Video {
    int frames = 0;
    int height = 0;
    int width = 0;
    std::vector<float> pixels;

    Video() = default;
    Video(int f, int h, int w, float fill = 0.0f)
        : frames(f), height(h), width(w), pixels(static_cast<size_t>(f) * h * w * 3, fill) {}

    size_t offset(int f, int y, int x, int c = 0) const {
        return ((static_cast<size_t>(f) * height + y) * width + x) * 3 + c;
    }
    float& at(int f, int y, int x, int c) { return pixels[offset(f, y, x, c)]; }
    float at(int f, int y, int x, int c) const { return pixels[offset(f, y, x, c)]; }

    size_t frame_size() const { return static_cast<size_t>(height) * width * 3; }
    bool same_shape(const Video& o) const { return frames == o.frames && height == o.height && width == o.width; }
    bool operator==(const Video&) const = default;
};

/// Rec.601 luma of one pixel.
inline float luminance(const Video& v, int f, int y, int x) {
    return 0.299f * v.at(f, y, x, 0) + 0.587f * v.at(f, y, x, 1) + 0.114f * v.at(f, y, x, 2);
}

}  // namespace kvedit
