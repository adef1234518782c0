// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "helpers.hpp"

#include "kvedit/config.hpp"

using namespace kvedit;
using kvedit::testing::kind_of;

namespace {

std::string config_error(const Json& j) {
    try {
        ExperimentConfig::from_json(j);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
        return e.what();
    }
    return "";
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults") {
    const ExperimentConfig c;
    CHECK(c.edit.t_i == 10);
    CHECK(c.edit.t_e == 25);
    CHECK(c.edit.t_mask == 0.8);
    CHECK(c.edit.k == 10.0);
    CHECK(c.edit.c_k == 0.1);
    CHECK(c.probe.n_p == 40);
    CHECK(c.probe.c == 400.0);
    CHECK(c.schedule.steps == 50);
    c.validate();
    const auto plan = c.plan(EditMode::object_addition);
    CHECK(plan.vital_layers == std::vector<int>{0, 1, 3});
    CHECK(plan.prominent_layer == 0);
    CHECK(plan.mask.threshold == 0.8);
}

TEST_CASE("json round trip resolves layer lists") {
    ExperimentConfig c;
    c.seed = 9;
    c.edit.t_i = 7;
    c.edit.non_vital_layers = std::vector<int>{5, 6};
    c.model.rope_free_layers = {2};
    const Json j = c.to_json();
    CHECK(j.at("edit").at("vital_layers") == Json::array({0, 1, 3}));
    CHECK(j.at("edit").at("non_vital_layers") == Json::array({5, 6}));
    const ExperimentConfig back = ExperimentConfig::from_json(j);
    CHECK(back.to_json() == j);
    CHECK(back.model == c.model);
    CHECK(back.seed == 9);
}

TEST_CASE("partial configs keep the other defaults") {
    const auto c = ExperimentConfig::from_json(Json::parse(R"({"edit": {"t_i": 5}, "sampler": {"steps": 20}})"));
    CHECK(c.edit.t_i == 5);
    CHECK(c.edit.t_e == 25);
    CHECK(c.schedule.steps == 20);
    CHECK_FALSE(c.edit.vital_layers.has_value());
}

TEST_CASE("unknown keys and wrong types are named") {
    CHECK(config_error(Json::parse(R"({"edit": {"foo": 1}})")) == "config: unknown key 'edit.foo'");
    CHECK(config_error(Json::parse(R"({"bogus": 1})")) == "config: unknown key 'bogus'");
    CHECK(config_error(Json::parse(R"({"edit": {"t_i": "ten"}})")) == "config: key 'edit.t_i' has the wrong type");
    CHECK(config_error(Json::parse(R"({"edit": {"t_i": 2.5}})")) == "config: key 'edit.t_i' has the wrong type");
    CHECK(config_error(Json::parse(R"({"model": 3})")) == "config: 'model' must be an object");
    CHECK(config_error(Json::parse(R"({"edit": {"preserve_prompt": 1}})")) ==
          "config: key 'edit.preserve_prompt' has the wrong type");
}

TEST_CASE("validation") {
    ExperimentConfig c;
    c.probe.n_p = 41;
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);
    c = {};
    c.edit.vital_layers = std::vector<int>{0, 8};
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);
    c = {};
    c.edit.t_mask = 1.2;
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);
    c = {};
    c.workers = 0;
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);
}

TEST_CASE("pipeline follows the sampler section") {
    ExperimentConfig c;
    c.schedule = {10, 500};
    const Pipeline p = c.pipeline();
    CHECK(p.schedule().steps == 10);
    CHECK(p.model().config().train_timesteps == 500);
}

TEST_CASE("integer lists") {
    CHECK(parse_int_list("3") == std::vector<int>{3});
    CHECK(parse_int_list("0,5,10") == std::vector<int>{0, 5, 10});
    CHECK(parse_int_list("-1,2") == std::vector<int>{-1, 2});
    for (const char* bad : {"", "1,", ",1", "a", "1;2", "1, 2"}) {
        CHECK_MESSAGE(kind_of([&] { parse_int_list(bad); }) == ErrorKind::usage, bad);
    }
}

}
