// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "helpers.hpp"

#include "kvedit/report.hpp"

using namespace kvedit;
using kvedit::testing::kind_of;

TEST_SUITE("report") {

TEST_CASE("vitality report round trip") {
    VitalityReport r;
    r.vitality_layer = {0.1, 0.2};
    r.vitality_rope = {0.0, 0.3};
    r.pearson_r = 1.0;
    r.n_prompts = 4;
    r.embedder = "toy";
    const auto back = vitality_from_json(to_json(r));
    CHECK(back.vitality_layer == r.vitality_layer);
    CHECK(back.vitality_rope == r.vitality_rope);
    CHECK(back.pearson_r == r.pearson_r);
    CHECK(back.n_prompts == 4);

    r.pearson_r.reset();
    CHECK_FALSE(vitality_from_json(to_json(r)).pearson_r.has_value());
}

TEST_CASE("readers list every missing field") {
    Json j = to_json(VitalityReport{});
    j.erase("vitality_rope");
    j.erase("n_prompts");
    try {
        vitality_from_json(j);
        FAIL("expected missing_data");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::missing_data);
        const std::string msg = e.what();
        CHECK(msg.find("vitality_rope") != std::string::npos);
        CHECK(msg.find("n_prompts") != std::string::npos);
    }
    CHECK(kind_of([] { prominence_from_json(Json::object()); }) == ErrorKind::missing_data);
    CHECK(kind_of([] { metrics_from_json(Json::object()); }) == ErrorKind::missing_data);
}

TEST_CASE("prominence report keeps exact doubles") {
    ProminenceReport r;
    r.psnr_fg = {20.123456789012345, 18.0};
    r.psnr_bg = {31.0, 25.5};
    r.psnr_fg_prompt = {r.psnr_fg};
    r.psnr_bg_prompt = {r.psnr_bg};
    r.included_prompts = {0};
    recompute_prominence(r);
    const auto back = prominence_from_json(Json::parse(dump_json(to_json(r))));
    CHECK(self_consistent(back));
    CHECK(back.p == r.p);
    CHECK(back.selected_layer == r.selected_layer);
}

TEST_CASE("metric report round trip") {
    MetricReport m;
    m.clip_dir = 0.1;
    m.clip_img = 0.9;
    m.clip_all = 0.09;
    m.tf = m.ms = m.sc = m.bc = 0.95;
    m.overall = 0.07;
    m.order = ClipAllOrder::mean_of_products;
    m.samples.push_back({"a", "b", 0.1, false, 0.9, 1, 1, 1, 1});
    const auto back = metrics_from_json(to_json(m));
    CHECK(back.overall == m.overall);
    CHECK(back.order == ClipAllOrder::mean_of_products);
    REQUIRE(back.samples.size() == 1);
    CHECK(back.samples[0].trg_prompt == "b");
}

TEST_CASE("mask and map tensors") {
    const LatentGrid g{2, 3, 4};
    EditMask m = EditMask::filled(g, false);
    m.bits[g.index(1, 2, 3)] = 1;
    const Tensor t = mask_tensor(m);
    CHECK(t.dims == std::vector<std::uint32_t>{2, 3, 4});
    CHECK(t.data[static_cast<size_t>(g.index(1, 2, 3))] == 1.0f);
    const Json j = to_json(m);
    CHECK(j.at("count") == 1);
    CHECK(j.at("degenerate") == false);

    GridMap map(g);
    map.at(0, 1, 2) = 0.25;
    const GridMap back = map_from_tensor(map_tensor(map));
    CHECK(back.grid == g);
    CHECK(back.values == map.values);
}

TEST_CASE("delta and failure summaries") {
    DeltaTokens d;
    d.indices = {2, 3};
    d.words = {"red", "hat"};
    d.runs = {{2, 4}};
    const Json j = to_json(d);
    CHECK(j.at("words") == Json::array({"red", "hat"}));
    CHECK(j.at("runs") == Json::parse("[[2, 4]]"));
    const Json f = to_json(std::vector<ProbeFailure>{{1, 3, "boom"}});
    CHECK(f.at(0).at("layer") == 3);
    CHECK(f.at(0).at("message") == "boom");
}

}
