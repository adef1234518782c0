// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "helpers.hpp"

#include "kvedit/prominence.hpp"

#include <cmath>

using namespace kvedit;
using kvedit::testing::kind_of;

namespace {

/// Adds `fg` inside the mask and `bg` outside to every channel.
Video shifted(const Scene& s, float fg, float bg) {
    Video v = s.video;
    for (int f = 0; f < v.frames; ++f) {
        for (int y = 0; y < v.height; ++y) {
            for (int x = 0; x < v.width; ++x) {
                for (int c = 0; c < 3; ++c) {
                    v.at(f, y, x, c) += s.mask.at(f, y, x) ? fg : bg;
                }
            }
        }
    }
    return v;
}

}  // namespace

TEST_SUITE("prominence") {

TEST_CASE("region PSNR pools squared error over the region") {
    const Scene s = synthesize_scene({}, 1);
    const Video v = shifted(s, 0.1f, 0.0f);
    CHECK(psnr_region(s.video, v, s.mask, Region::fg) == doctest::Approx(20.0).epsilon(1e-5));
    CHECK(psnr_region(s.video, v, s.mask, Region::bg) == kPsnrCap);
    CHECK(psnr_region(s.video, v, s.mask, Region::bg, 60.0) == 60.0);
    const Video w = shifted(s, 0.0f, 0.01f);
    CHECK(psnr_region(s.video, w, s.mask, Region::bg) == doctest::Approx(40.0).epsilon(1e-4));

    RegionMask empty(s.mask.frames, s.mask.height, s.mask.width);
    CHECK(kind_of([&] { psnr_region(s.video, v, empty, Region::fg); }) == ErrorKind::degenerate_region);
    CHECK(kind_of([&] { psnr_region(s.video, Video(1, 4, 4), s.mask, Region::fg); }) == ErrorKind::config);
}

TEST_CASE("normalized similarity is 0 at the minimum and rises toward 1") {
    double prev = normalized_similarity(12.0, 12.0, 40.0, 400.0);
    CHECK(prev == 0.0);
    for (double p = 13.0; p <= 40.0; p += 1.0) {
        const double s = normalized_similarity(p, 12.0, 40.0, 400.0);
        CHECK(s > prev);
        CHECK(s < 1.0);
        prev = s;
    }
    CHECK(kind_of([] { normalized_similarity(10.0, 12.0, 40.0, 400.0); }) == ErrorKind::domain);
    CHECK(kind_of([] { normalized_similarity(20.0, 12.0, 40.0, 0.0); }) == ErrorKind::config);
    CHECK(kind_of([] { prominence(1.2, 0.5); }) == ErrorKind::domain);
    CHECK(prominence(0.0, 1.0) == 1.0);
    CHECK(prominence(1.0, 1.0) == 0.0);
}

TEST_CASE("the layer that changes only the foreground is selected") {
    std::vector<Video> originals;
    std::vector<RegionMask> masks;
    std::vector<std::vector<std::optional<Video>>> probes;
    for (int p = 0; p < 2; ++p) {
        SceneSpec spec;
        spec.shape = p == 0 ? SceneShape::square : SceneShape::disc;
        const Scene s = synthesize_scene(spec, 40 + p);
        originals.push_back(s.video);
        masks.push_back(s.mask);
        probes.push_back({shifted(s, 0.05f, 0.05f), shifted(s, 0.2f, 0.002f), shifted(s, 0.01f, 0.2f)});
    }
    const auto r = build_prominence_report(originals, probes, {"a", "b"}, FixedMaskProvider(masks));
    CHECK(r.selected_layer == 1);
    CHECK(r.included_prompts == std::vector<int>{0, 1});
    CHECK(self_consistent(r));
    CHECK(r.psnr_min == doctest::Approx(-10.0 * std::log10(0.04)).epsilon(1e-4));
    for (size_t l = 0; l < 3; ++l) {
        CHECK(r.p[l] == doctest::Approx(r.s_bg[l] * (1.0 - r.s_fg[l])));
    }

    ProminenceOptions per;
    per.per_prompt = true;
    const auto rp = build_prominence_report(originals, probes, {"a", "b"}, FixedMaskProvider(masks), per);
    CHECK(rp.selected_layer == 1);
    CHECK(self_consistent(rp));

    auto tampered = r;
    tampered.p[0] += 1e-12;
    CHECK_FALSE(self_consistent(tampered));
}

TEST_CASE("degenerate prompts and missing layers are excluded and noted") {
    const Scene s = synthesize_scene({}, 3);
    RegionMask all(s.mask.frames, s.mask.height, s.mask.width);
    std::fill(all.fg.begin(), all.fg.end(), 1);
    const std::vector<Video> originals{s.video, s.video};
    std::vector<std::vector<std::optional<Video>>> probes{
        {shifted(s, 0.1f, 0.01f), std::nullopt, shifted(s, 0.02f, 0.02f)},
        {shifted(s, 0.1f, 0.01f), shifted(s, 0.1f, 0.01f), shifted(s, 0.02f, 0.02f)}};
    const auto r = build_prominence_report(originals, probes, {"a", "b"}, FixedMaskProvider({s.mask, all}));
    CHECK(r.included_prompts == std::vector<int>{0});
    CHECK(r.excluded_layers == std::vector<int>{1});
    CHECK(r.notes.size() == 2);
    CHECK(r.p[1] == 0.0);
    CHECK(r.selected_layer == 0);
    CHECK(kind_of([&] {
              build_prominence_report({s.video}, {probes[1]}, {"a"}, FixedMaskProvider({all}));
          }) == ErrorKind::degenerate_region);
}

TEST_CASE("synthetic scenes") {
    const Scene a = synthesize_scene({}, 9), b = synthesize_scene({}, 9);
    CHECK(a.video == b.video);
    CHECK(a.mask == b.mask);
    CHECK(a.mask.foreground() == 5 * 100);
    CHECK(a.mask.at(0, 10, 6) == 1);
    CHECK(a.mask.at(4, 10, 6 + 8) == 1);
    CHECK(a.mask.at(4, 10, 6) == 0);
    SceneSpec off;
    off.x0 = 25;
    CHECK(kind_of([&] { synthesize_scene(off, 1); }) == ErrorKind::spec);
    CHECK(a.mask.complement().foreground() == a.mask.background());
}

TEST_CASE("luminance masks") {
    const LuminanceMaskProvider lum(0.5);
    CHECK(lum.mask(Video(2, 8, 8, 0.4f), "", 0).degenerate());
    Video spot(1, 8, 8, 0.2f);
    for (int c = 0; c < 3; ++c) {
        spot.at(0, 3, 4, c) = 0.9f;
    }
    const RegionMask m = lum.mask(spot, "", 0);
    CHECK(m.foreground() == 1);
    CHECK(m.at(0, 3, 4) == 1);
}

}
