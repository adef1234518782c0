// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvedit/plot.hpp"

#include "kvedit/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace kvedit {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kLeft = 70;
constexpr double kRight = 150;
constexpr double kTop = 40;
constexpr double kBottom = 60;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Frame {
    double x0, x1, y0, y1;  // data range

    double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

std::pair<double, double> padded_range(double lo, double hi) {
    if (!(hi > lo)) {
        return {lo - 0.5, hi + 0.5};
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

void open_svg(std::ostringstream& s, const std::string& title) {
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
}

void axes(std::ostringstream& s, const Frame& f, const std::string& x_label, const std::string& y_label) {
    s << "<g class=\"axes\" stroke=\"black\">\n"
      << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kHeight - kBottom) << "\" x2=\"" << num(kWidth - kRight)
      << "\" y2=\"" << num(kHeight - kBottom) << "\"/>\n"
      << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft) << "\" y2=\""
      << num(kHeight - kBottom) << "\"/>\n</g>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = f.y0 + (f.y1 - f.y0) * i / 4.0;
        s << "<text class=\"ytick\" x=\"" << num(kLeft - 6) << "\" y=\"" << num(f.py(v) + 4)
          << "\" text-anchor=\"end\">" << tick(v) << "</text>\n";
    }
    s << "<text x=\"" << num((kLeft + kWidth - kRight) / 2) << "\" y=\"" << num(kHeight - 18)
      << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n"
      << "<text x=\"18\" y=\"" << num((kTop + kHeight - kBottom) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << num((kTop + kHeight - kBottom) / 2) << ")\">" << escape(y_label) << "</text>\n";
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series) {
    require(!series.empty() && !series.front().y.empty(), ErrorKind::missing_data, "line chart: no data");
    const size_t n = series.front().y.size();
    double lo = series.front().y.front();
    double hi = lo;
    for (const auto& sr : series) {
        require(sr.y.size() == n, ErrorKind::missing_data, "line chart: series '" + sr.label + "' has a different length");
        for (double v : sr.y) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    const auto [y0, y1] = padded_range(lo, hi);
    const Frame f{-0.5, static_cast<double>(n) - 0.5, y0, y1};
    std::ostringstream s;
    open_svg(s, title);
    axes(s, f, x_label, y_label);
    for (size_t i = 0; i < n; ++i) {
        const double x = f.px(static_cast<double>(i));
        s << "<text class=\"xtick\" x=\"" << num(x) << "\" y=\"" << num(kHeight - kBottom + 16)
          << "\" text-anchor=\"middle\">" << i << "</text>\n";
    }
    for (size_t k = 0; k < series.size(); ++k) {
        const auto& sr = series[k];
        s << "<polyline fill=\"none\" stroke=\"" << sr.color << "\" stroke-width=\"2\" points=\"";
        for (size_t i = 0; i < n; ++i) {
            s << (i ? " " : "") << num(f.px(static_cast<double>(i))) << "," << num(f.py(sr.y[i]));
        }
        s << "\"/>\n";
        for (size_t i = 0; i < n; ++i) {
            s << "<circle cx=\"" << num(f.px(static_cast<double>(i))) << "\" cy=\"" << num(f.py(sr.y[i]))
              << "\" r=\"3\" fill=\"" << sr.color << "\"/>\n";
        }
        const double ly = kTop + 10 + 18.0 * static_cast<double>(k);
        s << "<line x1=\"" << num(kWidth - kRight + 12) << "\" y1=\"" << num(ly) << "\" x2=\""
          << num(kWidth - kRight + 32) << "\" y2=\"" << num(ly) << "\" stroke=\"" << sr.color
          << "\" stroke-width=\"2\"/>\n"
          << "<text x=\"" << num(kWidth - kRight + 38) << "\" y=\"" << num(ly + 4) << "\">" << escape(sr.label)
          << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

std::string scatter_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                        const std::vector<double>& x, const std::vector<double>& y, const std::string& note) {
    require(!x.empty() && x.size() == y.size(), ErrorKind::missing_data, "scatter: need equal, non-empty x and y");
    const auto [xa, xb] = std::minmax_element(x.begin(), x.end());
    const auto [ya, yb] = std::minmax_element(y.begin(), y.end());
    const auto [x0, x1] = padded_range(*xa, *xb);
    const auto [y0, y1] = padded_range(*ya, *yb);
    const Frame f{x0, x1, y0, y1};
    std::ostringstream s;
    open_svg(s, title);
    axes(s, f, x_label, y_label);
    for (int i = 0; i <= 4; ++i) {
        const double v = f.x0 + (f.x1 - f.x0) * i / 4.0;
        s << "<text class=\"xtick\" x=\"" << num(f.px(v)) << "\" y=\"" << num(kHeight - kBottom + 16)
          << "\" text-anchor=\"middle\">" << tick(v) << "</text>\n";
    }
    for (size_t i = 0; i < x.size(); ++i) {
        s << "<circle cx=\"" << num(f.px(x[i])) << "\" cy=\"" << num(f.py(y[i])) << "\" r=\"4\" fill=\"#1f77b4\"/>\n"
          << "<text x=\"" << num(f.px(x[i]) + 6) << "\" y=\"" << num(f.py(y[i]) - 6) << "\" font-size=\"10\">" << i
          << "</text>\n";
    }
    if (!note.empty()) {
        s << "<text x=\"" << num(kWidth - kRight + 12) << "\" y=\"" << num(kTop + 10) << "\">" << escape(note)
          << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

std::vector<std::uint8_t> contact_sheet(const Video& video, int& width, int& height) {
    width = video.width * video.frames;
    height = video.height;
    std::vector<std::uint8_t> rgb(static_cast<size_t>(width) * height * 3);
    for (int f = 0; f < video.frames; ++f) {
        for (int y = 0; y < video.height; ++y) {
            for (int x = 0; x < video.width; ++x) {
                for (int c = 0; c < 3; ++c) {
                    const float v = std::clamp(video.at(f, y, x, c), 0.0f, 1.0f);
                    rgb[(static_cast<size_t>(y) * width + f * video.width + x) * 3 + c] =
                        static_cast<std::uint8_t>(std::lround(v * 255.0f));
                }
            }
        }
    }
    return rgb;
}

std::vector<std::uint8_t> attention_overlay(const Video& video, const GridMap& map, int patch, int& width,
                                            int& height) {
    const LatentGrid& g = map.grid;
    require(video.frames == g.frames && video.height == g.height * patch && video.width == g.width * patch,
            ErrorKind::config, "overlay: map grid " + g.str() + " does not tile the video");
    const auto [lo_it, hi_it] = std::minmax_element(map.values.begin(), map.values.end());
    const double lo = *lo_it;
    const double span = *hi_it > lo ? *hi_it - lo : 1.0;
    auto rgb = contact_sheet(video, width, height);
    for (int f = 0; f < video.frames; ++f) {
        for (int y = 0; y < video.height; ++y) {
            for (int x = 0; x < video.width; ++x) {
                const double a = 0.7 * (map.at(f, y / patch, x / patch) - lo) / span;
                const size_t at = (static_cast<size_t>(y) * width + f * video.width + x) * 3;
                const double red[3] = {255.0, 0.0, 0.0};
                for (int c = 0; c < 3; ++c) {
                    rgb[at + c] = static_cast<std::uint8_t>(std::lround((1.0 - a) * rgb[at + c] + a * red[c]));
                }
            }
        }
    }
    return rgb;
}

}  // namespace kvedit
