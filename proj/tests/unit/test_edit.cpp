// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"
#include "helpers.hpp"

#include "kvedit/edit.hpp"
#include "kvedit/probe.hpp"

#include <cmath>

using namespace kvedit;
using kvedit::testing::kind_of;
using kvedit::testing::short_pipeline;
namespace kt = kvedit::testing;

namespace {

InjectionPlan short_plan(EditMode mode) {
    InjectionPlan p = InjectionPlan::toy(mode);
    p.t_i = 4;
    p.t_e = 6;
    return p;
}

}  // namespace

TEST_SUITE("edit") {

TEST_CASE("delta tokens are the target words outside the LCS") {
    const auto d = find_delta_tokens("a cat on a sofa", "a cat with a hat on a sofa");
    CHECK(d.indices == std::vector<int>{2, 3, 4});
    CHECK(d.words == std::vector<std::string>{"with", "a", "hat"});
    CHECK(d.runs == std::vector<std::pair<int, int>>{{2, 5}});

    const auto two = find_delta_tokens("a dog in the park", "a brown dog in the snowy park");
    CHECK(two.words == std::vector<std::string>{"brown", "snowy"});
    CHECK(two.runs.size() == 2);

    CHECK(find_delta_tokens("A cat.", "a CAT").empty());
    CHECK(find_delta_tokens("a dog is running", "a dog is jumping").words == std::vector<std::string>{"jumping"});
    CHECK(kind_of([] { find_delta_tokens("...", "a cat"); }) == ErrorKind::config);
}

TEST_CASE("rescale clamps and rejects out-of-range input") {
    CHECK(rescale_attention(1.0, 10.0, 0.1) == 1.0);
    CHECK(rescale_attention(0.02, 10.0, 0.1) == doctest::Approx(std::log(1.2) / std::log(2.0)));
    CHECK(kind_of([] { rescale_attention(1.5, 10.0, 0.1); }) == ErrorKind::domain);
    CHECK(kind_of([] { rescale_attention(-0.1, 10.0, 0.1); }) == ErrorKind::domain);
    CHECK(kind_of([] { rescale_attention(0.5, 0.0, 0.1); }) == ErrorKind::config);
}

TEST_CASE("normalization and blur") {
    const LatentGrid g{2, 6, 6};
    CHECK_FALSE(normalize_map(GridMap(g, 0.3)).has_value());
    GridMap m(g);
    m.at(1, 2, 2) = 4.0;
    m.at(0, 0, 0) = 2.0;
    const auto n = normalize_map(m);
    REQUIRE(n);
    CHECK(n->at(1, 2, 2) == 1.0);
    CHECK(n->at(0, 0, 0) == 0.5);

    const GridMap flat = gaussian_blur(GridMap(g, 0.7), 3, 1.0);
    for (double v : flat.values) {
        CHECK(v == doctest::Approx(0.7));
    }
    CHECK(gaussian_blur(m, 1, 1.0).values == m.values);
    const GridMap b = gaussian_blur(m, 3, 1.0);
    double frame1 = 0.0;
    for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 6; ++x) {
            frame1 += b.at(1, y, x);
        }
    }
    CHECK(frame1 == doctest::Approx(4.0));  // interior impulse keeps its mass
    CHECK(b.at(0, 3, 3) == 0.0);            // nothing leaks across frames
    CHECK(kind_of([&] { gaussian_blur(m, 2, 1.0); }) == ErrorKind::config);
}

TEST_CASE("mask pipeline config validation") {
    MaskPipelineConfig c;
    c.threshold = 1.0;
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);
    c = {};
    c.window = 0;
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);
}

TEST_CASE("flat attention yields an empty mask with a warning") {
    const LatentGrid g{};
    const auto rec = kt::planted_attention(GridMap(g, 0.2), 16, {3}, 0, {1, 2});
    const EditMask m = extract_edit_mask(rec, kt::delta_of({3}), 0, {1, 2}, g, {});
    CHECK(m.degenerate);
    CHECK(m.empty());
    CHECK(m.warnings.size() == 1);
    CHECK(kind_of([&] { extract_edit_mask(rec, kt::delta_of({3}), 0, {1, 5}, g, {}); }) == ErrorKind::missing_data);
    CHECK(kind_of([&] { extract_edit_mask(rec, kt::delta_of({}), 0, {1}, g, {}); }) == ErrorKind::no_edit);
    CHECK(kind_of([&] { extract_edit_mask(rec, kt::delta_of({16}), 0, {1}, g, {}); }) == ErrorKind::config);
}

TEST_CASE("accumulation averages delta columns and sums steps") {
    const LatentGrid g{1, 2, 2};
    auto att = std::make_shared<AttentionMap>();
    att->weights = Matrix::Zero(3 + 4, 3 + 4);
    att->text_len = 3;
    att->weights(3, 0) = 0.2f;
    att->weights(3, 2) = 0.4f;
    att->weights(6, 1) = 0.5f;
    ForwardRecords rec;
    rec.attention[{1, 0}] = att;
    rec.attention[{1, 1}] = att;
    const GridMap acc = accumulate_delta_attention(rec, kt::delta_of({0, 2}), 1, {0, 1}, g);
    CHECK(acc.values[0] == doctest::Approx(2 * (0.2 + 0.4) / 2));
    CHECK(acc.values[3] == 0.0);
}

TEST_CASE("mix_kv blends rows and checks shapes") {
    Matrix ks = Matrix::Constant(2, 3, 1.0f), vs = Matrix::Constant(2, 3, 2.0f);
    Matrix kt_ = Matrix::Constant(2, 3, 5.0f), vt = Matrix::Constant(2, 3, 7.0f);
    const TokenMask mask{0.5f, 1.0f};
    const KvMix mix = mix_kv(ks, vs, kt_, vt, &mask);
    CHECK(mix.keys(0, 0) == 3.0f);
    CHECK(mix.keys(1, 2) == 5.0f);
    CHECK(mix.values(0, 1) == 4.5f);
    CHECK(mix_kv(ks, vs, kt_, vt, nullptr).keys == ks);
    const TokenMask short_mask{1.0f};
    CHECK(kind_of([&] { mix_kv(ks, vs, kt_, vt, &short_mask); }) == ErrorKind::injection);
    CHECK(kind_of([&] { mix_kv(ks, vs, Matrix::Zero(3, 3), vt, nullptr); }) == ErrorKind::injection);
}

TEST_CASE("plan validation") {
    InjectionPlan p = short_plan(EditMode::object_addition);
    p.validate(8, 8);
    p.t_i = 0;
    CHECK(kind_of([&] { p.validate(8, 8); }) == ErrorKind::config);
    p.t_i = 2;  // below the 3-step window
    CHECK(kind_of([&] { p.validate(8, 8); }) == ErrorKind::config);
    p.t_i = 4;
    p.t_e = 9;
    CHECK(kind_of([&] { p.validate(8, 8); }) == ErrorKind::config);
    p.t_e = 6;
    p.vital_layers = {8};
    CHECK(kind_of([&] { p.validate(8, 8); }) == ErrorKind::config);

    InjectionPlan nr = short_plan(EditMode::non_rigid);
    nr.validate(8, 8);
    nr.non_vital_layers.clear();
    CHECK(kind_of([&] { nr.validate(8, 8); }) == ErrorKind::config);
    nr.use_vital_for_non_rigid = true;
    nr.validate(8, 8);

    CHECK(InjectionPlan::defaults_for(ModelConfig{}, EditMode::non_rigid).non_vital_layers == std::vector<int>{4, 6, 7});
    ModelConfig big;
    big.num_layers = kBackboneLayers;
    CHECK(InjectionPlan::defaults_for(big, EditMode::object_addition).prominent_layer == kBackboneProminentLayer);
}

TEST_CASE("object addition keeps the source stream and extracts a mask at T_i - 1") {
    const auto& pipe = short_pipeline();
    const auto r = object_addition(pipe, "a cat on a sofa", "a cat with a hat on a sofa", 2,
                                   short_plan(EditMode::object_addition));
    CHECK(r.source_video == sample(pipe, "a cat on a sofa", 2).video);
    CHECK(r.target_video != r.source_video);
    REQUIRE(r.mask);
    CHECK(r.mask->steps == std::vector<int>{1, 2, 3});
    CHECK(r.mask->layer == kToyProminentLayer);
    CHECK(r.mask->count() > 0);
    CHECK(r.attention.size() == 3);
    CHECK(r.attention.count(1) == 1);
    CHECK(r.divergence.size() == 8);
    CHECK(r.delta.words == std::vector<std::string>{"with", "a", "hat"});

    const auto again = object_addition(pipe, "a cat on a sofa", "a cat with a hat on a sofa", 2,
                                       short_plan(EditMode::object_addition));
    CHECK(again.target_video == r.target_video);
    CHECK(again.mask->bits == r.mask->bits);
}

TEST_CASE("object addition needs a delta unless a mask is forced") {
    const auto& pipe = short_pipeline();
    const auto plan = short_plan(EditMode::object_addition);
    CHECK(kind_of([&] { object_addition(pipe, "a cat", "a cat", 0, plan); }) == ErrorKind::no_edit);
    CHECK(kind_of([&] { object_addition(pipe, "a cat", "a cat", 0, short_plan(EditMode::non_rigid)); }) ==
          ErrorKind::config);

    ObjectAdditionOptions opt;
    opt.allow_empty_delta = true;
    opt.forced_mask = std::make_shared<EditMask>(EditMask::filled(LatentGrid{}, false));
    InjectionPlan keep = plan;
    keep.preserve_prompt = false;
    const auto r = object_addition(pipe, "a cat", "a cat", 0, keep, opt);
    CHECK_FALSE(r.mask);
    CHECK(r.target_video == r.source_video);  // identical prompts under injection

    opt.forced_mask = std::make_shared<EditMask>(EditMask::filled(LatentGrid{1, 1, 1}, true));
    CHECK(kind_of([&] { object_addition(pipe, "a cat", "a cat", 0, keep, opt); }) == ErrorKind::config);
}

TEST_CASE("non-rigid editing injects the chosen layer set") {
    const auto& pipe = short_pipeline();
    auto plan = short_plan(EditMode::non_rigid);
    const auto r = non_rigid_edit(pipe, "a dog is sitting", "a dog is jumping", 1, plan);
    CHECK(r.source_video == sample(pipe, "a dog is sitting", 1).video);
    CHECK(r.target_video != r.source_video);
    CHECK_FALSE(r.mask);
    plan.use_vital_for_non_rigid = true;
    const auto v = non_rigid_edit(pipe, "a dog is sitting", "a dog is jumping", 1, plan);
    CHECK(v.target_video != r.target_video);
    CHECK(v.source_video == r.source_video);
}

TEST_CASE("real-video editing starts from the inverted noise") {
    const auto& pipe = short_pipeline();
    const Video input = sample(pipe, "a cat on a sofa", 30).video;
    const auto r = edit_real_video(pipe, input, "a cat on a sofa", "a cat with a hat on a sofa",
                                   short_plan(EditMode::object_addition));
    CHECK(r.inverted.data == ddim_invert(pipe, input, "a cat on a sofa").data);
    CHECK(r.reconstruction == r.edit.source_video);
    CHECK(r.edit.mask.has_value());
}

TEST_CASE("change-mask IoU") {
    const LatentGrid g{1, 2, 2};
    Video a(1, 8, 8, 0.5f), b = a;
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            b.at(0, y, x, 1) = 0.9f;
        }
    }
    EditMask m = EditMask::filled(g, false);
    m.bits[0] = 1;
    CHECK(change_mask_iou(a, b, m, 4, 0.1) == 1.0);
    m.bits[1] = 1;
    CHECK(change_mask_iou(a, b, m, 4, 0.1) == 0.5);
    CHECK(kind_of([&] { change_mask_iou(a, b, m, 2, 0.1); }) == ErrorKind::config);
}

}
