// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "helpers.hpp"

#include "kvedit/plot.hpp"

using namespace kvedit;

TEST_SUITE("plot") {

TEST_CASE("line chart svg") {
    const auto svg = line_chart_svg("Vitality <per layer>", "layer", "score",
                                    {{"bypass", {0.1, 0.4, 0.2}, "#1f77b4"}, {"rope", {0.0, 0.3, 0.1}, "#d62728"}});
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("Vitality &lt;per layer&gt;") != std::string::npos);
    CHECK(svg.find("bypass") != std::string::npos);
    CHECK(svg == line_chart_svg("Vitality <per layer>", "layer", "score",
                                {{"bypass", {0.1, 0.4, 0.2}, "#1f77b4"}, {"rope", {0.0, 0.3, 0.1}, "#d62728"}}));
    // a flat series must not divide by zero
    CHECK(line_chart_svg("flat", "x", "y", {{"c", {0.5, 0.5}, "#000"}}).find("nan") == std::string::npos);
}

TEST_CASE("scatter svg") {
    const auto svg = scatter_svg("r", "bypass", "rope", {0.1, 0.2}, {0.3, 0.1}, "r = -1.00");
    CHECK(svg.find("r = -1.00") != std::string::npos);
    CHECK(svg.find("<circle") != std::string::npos);
}

TEST_CASE("overlay and contact sheet tile frames") {
    Video v(3, 8, 8, 0.5f);
    GridMap m(LatentGrid{3, 2, 2});
    m.at(1, 0, 1) = 1.0;
    int w = 0, h = 0;
    const auto rgb = attention_overlay(v, m, 4, w, h);
    CHECK(w == 24);
    CHECK(h == 8);
    REQUIRE(rgb.size() == static_cast<size_t>(w * h * 3));
    const auto px = [&](int x, int y) { return &rgb[(static_cast<size_t>(y) * w + x) * 3]; };
    CHECK(px(8 + 5, 1)[0] > px(8 + 1, 1)[0]);  // highlighted cell is redder
    CHECK(px(0, 0)[0] == px(16, 0)[0]);

    const auto sheet = contact_sheet(v, w, h);
    CHECK(w == 24);
    CHECK(sheet[0] == 128);
}

}
