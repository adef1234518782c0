// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "helpers.hpp"

#include "kvedit/sampler.hpp"

#include <cmath>

using namespace kvedit;
using kvedit::testing::kind_of;
using kvedit::testing::short_pipeline;

TEST_SUITE("sampler") {

TEST_CASE("trailing timestep spacing") {
    const DenoiseSchedule s{50, 1000};
    CHECK(s.train_timestep(0) == 999);
    CHECK(s.train_timestep(49) == 19);
    for (int i = 1; i < 50; ++i) {
        CHECK(s.train_timestep(i) < s.train_timestep(i - 1));
    }
    CHECK(kind_of([&] { s.train_timestep(50); }) == ErrorKind::config);
    CHECK(kind_of([] { DenoiseSchedule{0, 1000}.validate(); }) == ErrorKind::config);
    CHECK(kind_of([] { DenoiseSchedule{20, 10}.validate(); }) == ErrorKind::config);
}

TEST_CASE("signal levels rise to one") {
    const auto levels = signal_levels(short_pipeline().model(), short_pipeline().schedule());
    REQUIRE(levels.size() == 9);
    for (size_t i = 1; i < levels.size(); ++i) {
        CHECK(levels[i] > levels[i - 1]);
    }
    CHECK(levels.back() == 1.0);
}

TEST_CASE("a DDIM step with the true noise lands on the clean latent") {
    GaussianStream rng(4);
    const Matrix x0 = rng.matrix(6, 3), eps = rng.matrix(6, 3);
    const double a = 0.3;
    const Matrix x = static_cast<float>(std::sqrt(a)) * x0 + static_cast<float>(std::sqrt(1 - a)) * eps;
    CHECK((ddim_step(x, eps, a, 1.0) - x0).cwiseAbs().maxCoeff() < 1e-5f);
    const double b = 0.7;
    const Matrix expect = static_cast<float>(std::sqrt(b)) * x0 + static_cast<float>(std::sqrt(1 - b)) * eps;
    CHECK((ddim_step(x, eps, a, b) - expect).cwiseAbs().maxCoeff() < 1e-5f);
}

TEST_CASE("decoder encode inverts decode inside the clip range") {
    const Decoder& d = short_pipeline().decoder();
    CHECK(d.frame_height() == 32);
    const Matrix gram = d.basis().transpose() * d.basis();
    CHECK((gram - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-5f);

    GaussianStream rng(2);
    LatentVideo z(LatentGrid{}, rng.matrix(320, 8, 0.2));
    const LatentVideo back = d.encode(d.decode(z));
    CHECK((back.data - z.data).cwiseAbs().maxCoeff() < 1e-4f);
    CHECK(kind_of([&] { d.encode(Video(5, 16, 16)); }) == ErrorKind::config);
}

TEST_CASE("sampling is deterministic in (prompt, seed)") {
    const auto& pipe = short_pipeline();
    SampleOptions opt;
    opt.keep_trajectory = true;
    const auto a = sample(pipe, "a red boat on a calm lake", 5, {}, opt);
    const auto b = sample(pipe, "a red boat on a calm lake", 5);
    const auto c = sample(pipe, "a red boat on a calm lake", 6);
    CHECK(a.video == b.video);
    CHECK(a.latent.data == b.latent.data);
    CHECK(a.video != c.video);
    CHECK(a.trajectory.size() == 8);
    CHECK(a.trajectory.back().data == a.latent.data);
    CHECK(b.trajectory.empty());
    for (float v : a.video.pixels) {
        REQUIRE((v >= 0.0f && v <= 1.0f));
    }
}

TEST_CASE("an explicit initial latent overrides the seed") {
    const auto& pipe = short_pipeline();
    SampleOptions opt;
    opt.initial = pipe.initial_noise(5);
    CHECK(sample(pipe, "a red boat", 99, {}, opt).video == sample(pipe, "a red boat", 5).video);
}

TEST_CASE("uncoupled paired streams are independent samples") {
    const auto& pipe = short_pipeline();
    NoCoupling none;
    const auto r = paired_sample(pipe, {"a red boat", "a blue boat", 8, std::nullopt}, none);
    CHECK(r.source_video == sample(pipe, "a red boat", 8).video);
    CHECK(r.target_video == sample(pipe, "a blue boat", 8).video);
    CHECK(r.divergence.size() == 8);
}

TEST_CASE("coupling horizon must fit the schedule") {
    const auto& pipe = short_pipeline();
    UniformCoupling c({1}, 0, 9);
    CHECK(kind_of([&] { paired_sample(pipe, {"a", "b", 0, std::nullopt}, c); }) == ErrorKind::config);
    CHECK(kind_of([] { UniformCoupling({1}, 5, 2); }) == ErrorKind::config);
}

TEST_CASE("injection hooks stay inside [begin, end)") {
    UniformCoupling c({1, 3}, 2, 4);
    CHECK(c.source_hooks(1).empty());
    CHECK(c.source_hooks(2).at(3).capture_kv);
    CHECK(c.source_hooks(4).empty());
}

TEST_CASE("inversion then resampling reproduces the original") {
    const auto& pipe = short_pipeline();
    const auto original = sample(pipe, "a lighthouse on a cliff", 12);
    SampleOptions opt;
    opt.initial = ddim_invert(pipe, original.video, "a lighthouse on a cliff");
    const auto again = sample(pipe, "a lighthouse on a cliff", 0, {}, opt);
    double mse = 0.0;
    for (size_t i = 0; i < again.video.pixels.size(); ++i) {
        const double d = again.video.pixels[i] - original.video.pixels[i];
        mse += d * d;
    }
    mse /= static_cast<double>(again.video.pixels.size());
    CHECK(-10.0 * std::log10(mse) > 25.0);
}

}
