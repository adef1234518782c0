// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "helpers.hpp"

#include "kvedit/harness.hpp"
#include "kvedit/report.hpp"

using namespace kvedit;
using kvedit::testing::kind_of;
using kvedit::testing::TempDir;

namespace {

ExperimentConfig quick() {
    ExperimentConfig c;
    c.schedule.steps = 8;
    c.edit.t_i = 4;
    c.edit.t_e = 6;
    c.seed = 2;
    return c;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("experiment ids hash command, config and inputs") {
    const Json cfg = ExperimentConfig{}.to_json();
    const Json in = {{"prompt", "a cat"}};
    const auto id = experiment_id("generate", cfg, in);
    CHECK(id.size() == 16);
    CHECK(id == experiment_id("generate", cfg, in));
    CHECK(id != experiment_id("generate", cfg, Json{{"prompt", "a dog"}}));
    CHECK(id != experiment_id("edit-add", cfg, in));
}

TEST_CASE("generate writes a verifiable directory") {
    TempDir tmp("harness-gen");
    const auto r = run_command({"generate", quick(), {{"prompt", "a red kite"}}, tmp / "g"});
    CHECK(r.dir == tmp / "g");
    CHECK(r.manifest.command == "generate");
    CHECK(fs::exists(tmp / "g/manifest.json"));
    CHECK(verify_manifest(tmp / "g").empty());
    const Video v = video_from_tensor(read_tensor(tmp / "g/video.tvlv"));
    CHECK(v.frames == 5);
    CHECK(load_frames(tmp / "g/frames").same_shape(v));

    const Manifest m = Manifest::load(tmp / "g");
    CHECK(m.id == r.manifest.id);
    CHECK(std::is_sorted(m.artifacts.begin(), m.artifacts.end(),
                         [](const Artifact& a, const Artifact& b) { return a.path < b.path; }));
    CHECK(ExperimentConfig::from_json(m.config).to_json() == quick().to_json());

    write_text(tmp / "g/frames/0002.png", "tampered");
    fs::remove(tmp / "g/video.tvlv");
    const auto problems = verify_manifest(tmp / "g");
    CHECK(problems == std::vector<std::string>{"frames/0002.png: checksum mismatch", "video.tvlv: missing"});
}

TEST_CASE("rerun reproduces every artifact") {
    TempDir tmp("harness-rerun");
    const auto a = run_command({"edit-add", quick(), {{"src", "a cat on a sofa"}, {"trg", "a cat with a hat on a sofa"}},
                                tmp / "a"});
    const auto b = rerun(tmp / "a", tmp / "b");
    CHECK(b.manifest.id == a.manifest.id);
    REQUIRE(b.manifest.artifacts.size() == a.manifest.artifacts.size());
    for (size_t i = 0; i < a.manifest.artifacts.size(); ++i) {
        const auto& x = a.manifest.artifacts[i];
        const auto& y = b.manifest.artifacts[i];
        CHECK(x.path == y.path);
        CHECK(x.role == y.role);
        if (x.path != "edit.json") {
            CHECK_MESSAGE(x.sha256 == y.sha256, x.path);
        }
    }
    const Json e = read_json(tmp / "a/edit.json");
    CHECK(e.at("delta").at("words") == Json::array({"with", "a", "hat"}));
    CHECK(fs::exists(tmp / "a/mask.tvlv"));
    CHECK(fs::exists(tmp / "a/attention/overlay_step_03.png"));
}

TEST_CASE("request errors") {
    TempDir tmp("harness-err");
    CHECK(kind_of([&] { run_command({"bogus", quick(), {}, tmp / "x"}); }) == ErrorKind::usage);
    CHECK(kind_of([&] { run_command({"generate", quick(), Json::object(), tmp / "y"}); }) == ErrorKind::usage);
    auto bad = quick();
    bad.edit.t_i = 0;
    CHECK(kind_of([&] { run_command({"edit-add", bad, {{"src", "a cat"}, {"trg", "a red cat"}}, tmp / "z"}); }) ==
          ErrorKind::config);
    CHECK(fs::exists(tmp / "z/manifest.json"));  // failed runs stay indexed
    CHECK(kind_of([&] { run_command({"edit-add", quick(), {{"src", "a cat"}, {"trg", "a cat"}}, tmp / "w"}); }) ==
          ErrorKind::no_edit);
    CHECK(kind_of([&] { run_command({"report", quick(), {{"run", (tmp / "nope").string()}}, tmp / "r"}); }) ==
          ErrorKind::io);
    CHECK(kind_of([&] { run_command({"sweep", quick(), {{"target", "generate"}, {"src", "a"}, {"trg", "b"}}, tmp / "s"}); }) ==
          ErrorKind::usage);
}

TEST_CASE("sweep records failed cells") {
    TempDir tmp("harness-sweep");
    const auto r = run_command({"sweep", quick(),
                                {{"target", "edit-add"},
                                 {"src", "a cat on a sofa"},
                                 {"trg", "a cat with a hat on a sofa"},
                                 {"t_i", {1, 4}},
                                 {"t_e", {6}}},
                                tmp / "s"});
    const Json s = read_json(tmp / "s/sweep.json");
    REQUIRE(s.at("runs").size() == 2);
    CHECK(s.at("runs")[0].at("status") == "failed");
    CHECK(s.at("runs")[0].at("error") == "config-error");
    CHECK(s.at("runs")[1].at("status") == "ok");
    CHECK(fs::exists(tmp / "s/sweep.png"));
    CHECK(verify_manifest(tmp / "s").empty());
}

TEST_CASE("evaluate and report read edit directories") {
    TempDir tmp("harness-eval");
    const auto cfg = quick();
    run_command({"edit-add", cfg, {{"src", "a cat on a sofa"}, {"trg", "a cat with a hat on a sofa"}}, tmp / "e"});
    run_command({"evaluate", cfg, {{"runs", {(tmp / "e").string()}}}, tmp / "m"});
    const Json m = read_json(tmp / "m/metrics.json");
    const MetricReport rep = metrics_from_json(m);
    CHECK(rep.samples.size() == 1);
    CHECK(rep.overall == doctest::Approx(rep.clip_all * rep.tf * rep.ms * rep.sc * rep.bc));

    run_command({"report", cfg, {{"run", (tmp / "e").string()}}, tmp / "r"});
    CHECK(fs::exists(tmp / "r/report.json"));
    CHECK(kind_of([&] { run_command({"evaluate", cfg, {{"runs", {(tmp / "r").string()}}}, tmp / "m2"}); }) ==
          ErrorKind::missing_data);
}

}
