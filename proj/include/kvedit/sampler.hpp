// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kvedit/model.hpp"
#include "kvedit/prompt.hpp"
#include "kvedit/video.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace kvedit {

/// Deterministic (eta = 0) DDIM schedule over evenly spaced training timesteps.
/// Step 0 sits at the noisiest training timestep; level T is the clean latent.
struct DenoiseSchedule {
    int steps = 50;
    int train_timesteps = 1000;

    void validate() const;
    /// Training timestep conditioned on at denoising step i (0 <= i < steps).
    int train_timestep(int step) const;
};

/// Signal levels (alpha-bar) at step boundaries 0..steps; strictly increasing, last = 1.
std::vector<double> signal_levels(const Model& model, const DenoiseSchedule& schedule);

struct DecoderConfig {
    int patch = 4;
    double scale = 0.25;
    std::uint64_t seed = 0x5eed;
};

/// Linear patch decoder standing in for a VAE. Each latent token expands to a
/// patch x patch RGB block via a column-orthonormal projection, so encode
/// inverts decode exactly wherever decode does not clip.
class Decoder {
public:
    Decoder(const LatentGrid& grid, int channels, DecoderConfig config = {});

    Video decode(const LatentVideo& latents) const;
    LatentVideo encode(const Video& video) const;

    int frame_height() const { return grid_.height * config_.patch; }
    int frame_width() const { return grid_.width * config_.patch; }
    const DecoderConfig& config() const { return config_; }
    const Matrix& basis() const { return basis_; }  // [patch*patch*3 x channels]

private:
    LatentGrid grid_;
    int channels_;
    DecoderConfig config_;
    Matrix basis_;
};

/// Model, text embedder, decoder and schedule bundled for sampling. Immutable.
class Pipeline {
public:
    Pipeline(ModelConfig model_config, DenoiseSchedule schedule = {}, DecoderConfig decoder = {});

    const Model& model() const { return *model_; }
    const PromptEmbedder& text() const { return text_; }
    const Decoder& decoder() const { return decoder_; }
    const DenoiseSchedule& schedule() const { return schedule_; }

    /// Initial latent z_0 drawn from a unit Gaussian with the given seed.
    LatentVideo initial_noise(std::uint64_t seed) const;

private:
    std::shared_ptr<const Model> model_;
    PromptEmbedder text_;
    Decoder decoder_;
    DenoiseSchedule schedule_;
};

using StepHooks = std::function<HookMap(int step)>;

struct SampleOptions {
    std::optional<LatentVideo> initial;  // overrides the seeded draw
    bool keep_trajectory = false;
};

struct SampleResult {
    Video video;
    LatentVideo latent;
    ForwardRecords records;
    std::vector<LatentVideo> trajectory;  // latent after each step, when requested
};

/// One DDIM update from step i with a noise prediction.
Matrix ddim_step(const Matrix& x, const Matrix& eps, double level_now, double level_next);

SampleResult sample(const Pipeline& pipe, const std::string& prompt, std::uint64_t seed,
                    const StepHooks& hooks = {}, const SampleOptions& options = {});

/// Controls how the target stream of a paired run is coupled to the source.
class Coupling {
public:
    virtual ~Coupling() = default;
    /// Last step (exclusive) at which this coupling acts; validated against T.
    virtual int horizon() const = 0;
    virtual HookMap source_hooks(int step) const = 0;
    virtual HookMap target_hooks(int step, const ForwardRecords& source) const = 0;
    /// Called after the target forward of each step with its captures.
    virtual void observe_target(int /*step*/, const ForwardRecords& /*target*/) {}
};

/// No coupling: the two streams are independent samples.
class NoCoupling final : public Coupling {
public:
    int horizon() const override { return 0; }
    HookMap source_hooks(int) const override { return {}; }
    HookMap target_hooks(int, const ForwardRecords&) const override { return {}; }
};

/// Injects source KV into a fixed layer set over [begin, end), optionally masked.
class UniformCoupling final : public Coupling {
public:
    UniformCoupling(std::set<int> layers, int begin, int end, std::shared_ptr<const TokenMask> mask = nullptr,
                    bool block_text_to_visual = false);

    int horizon() const override { return end_; }
    HookMap source_hooks(int step) const override;
    HookMap target_hooks(int step, const ForwardRecords& source) const override;

private:
    std::set<int> layers_;
    int begin_;
    int end_;
    std::shared_ptr<const TokenMask> mask_;
    bool block_text_;
};

struct RunSpec {
    std::string source_prompt;
    std::string target_prompt;
    std::uint64_t seed = 0;
    /// Shared initial latent for both streams (real-video editing); seeded draw otherwise.
    std::optional<LatentVideo> initial;
};

struct PairedResult {
    Video source_video;
    Video target_video;
    LatentVideo source_latent;
    LatentVideo target_latent;
    ForwardRecords target_records;
    /// L2 distance between the two streams' latents after every step.
    std::vector<double> divergence;
};

/// Source and target streams in lockstep from the same z_0. Each step runs the
/// source first (capturing KV) and then the target (injecting per coupling).
PairedResult paired_sample(const Pipeline& pipe, const RunSpec& spec, Coupling& coupling);

/// Deterministic DDIM inversion of a clean latent; returns the z_0 estimate.
LatentVideo ddim_invert(const Pipeline& pipe, const LatentVideo& clean, const std::string& prompt,
                        const DenoiseSchedule& schedule);

/// Inversion of decoded frames (encoded first).
LatentVideo ddim_invert(const Pipeline& pipe, const Video& video, const std::string& prompt);

}  // namespace kvedit
