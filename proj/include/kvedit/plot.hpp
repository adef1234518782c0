// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kvedit/edit.hpp"
#include "kvedit/io.hpp"

#include <string>
#include <vector>

namespace kvedit {

struct Series {
    std::string label;
    std::vector<double> y;
    std::string color;
};

/// Static SVG line chart over x = 0..n-1 with one tick per point.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);

/// Static SVG scatter plot with point labels 0..n-1.
std::string scatter_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                        const std::vector<double>& x, const std::vector<double>& y, const std::string& note);

/// Frames tiled left to right with the map (upsampled by `patch`) blended in red.
/// Returns packed RGB; width = frames * frame width.
std::vector<std::uint8_t> attention_overlay(const Video& video, const GridMap& map, int patch, int& width,
                                            int& height);

/// Same tiling, no overlay; a quick contact sheet for a video.
std::vector<std::uint8_t> contact_sheet(const Video& video, int& width, int& height);

}  // namespace kvedit
