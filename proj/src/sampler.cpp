// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvedit/sampler.hpp"

#include "kvedit/error.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace kvedit {

void DenoiseSchedule::validate() const {
    require(steps >= 1, ErrorKind::config, "schedule: steps must be positive");
    require(train_timesteps >= steps, ErrorKind::config,
            "schedule: " + std::to_string(steps) + " steps exceed " + std::to_string(train_timesteps) +
                " training timesteps");
}

int DenoiseSchedule::train_timestep(int step) const {
    require(step >= 0 && step < steps, ErrorKind::config, "schedule: step " + std::to_string(step) + " out of range");
    // trailing spacing: step 0 -> train_timesteps - 1
    return static_cast<int>((static_cast<long long>(train_timesteps) * (steps - step)) / steps) - 1;
}

std::vector<double> signal_levels(const Model& model, const DenoiseSchedule& schedule) {
    schedule.validate();
    require(schedule.train_timesteps == model.config().train_timesteps, ErrorKind::config,
            "schedule uses " + std::to_string(schedule.train_timesteps) + " training timesteps but the model has " +
                std::to_string(model.config().train_timesteps));
    std::vector<double> levels(static_cast<size_t>(schedule.steps) + 1);
    for (int i = 0; i < schedule.steps; ++i) {
        levels[static_cast<size_t>(i)] = model.signal_level(schedule.train_timestep(i));
    }
    levels.back() = 1.0;
    return levels;
}

Decoder::Decoder(const LatentGrid& grid, int channels, DecoderConfig config)
    : grid_(grid), channels_(channels), config_(config) {
    const int rows = config_.patch * config_.patch * 3;
    require(config_.patch > 0 && rows >= channels, ErrorKind::config,
            "decoder patch " + std::to_string(config_.patch) + " too small for " + std::to_string(channels) +
                " channels");
    require(config_.scale > 0.0, ErrorKind::config, "decoder scale must be positive");
    GaussianStream rng(config_.seed);
    const Eigen::MatrixXf gauss = rng.matrix(rows, channels);
    Eigen::HouseholderQR<Eigen::MatrixXf> qr(gauss);
    basis_ = qr.householderQ() * Eigen::MatrixXf::Identity(rows, channels);
}

Video Decoder::decode(const LatentVideo& latents) const {
    require(latents.grid == grid_ && latents.channels() == channels_, ErrorKind::config,
            "decode: latent " + latents.grid.str() + "x" + std::to_string(latents.channels()) +
                " does not match decoder " + grid_.str() + "x" + std::to_string(channels_));
    const int p = config_.patch;
    Video video(grid_.frames, frame_height(), frame_width());
    const Matrix patches = (latents.data * basis_.transpose()) * static_cast<float>(config_.scale);
    for (int f = 0; f < grid_.frames; ++f) {
        for (int y = 0; y < grid_.height; ++y) {
            for (int x = 0; x < grid_.width; ++x) {
                const auto row = patches.row(grid_.index(f, y, x));
                for (int py = 0; py < p; ++py) {
                    for (int px = 0; px < p; ++px) {
                        for (int c = 0; c < 3; ++c) {
                            const float v = 0.5f + row[(py * p + px) * 3 + c];
                            video.at(f, y * p + py, x * p + px, c) = std::clamp(v, 0.0f, 1.0f);
                        }
                    }
                }
            }
        }
    }
    return video;
}

LatentVideo Decoder::encode(const Video& video) const {
    require(video.frames == grid_.frames && video.height == frame_height() && video.width == frame_width(),
            ErrorKind::config,
            "encode: video " + std::to_string(video.frames) + "x" + std::to_string(video.height) + "x" +
                std::to_string(video.width) + " does not match decoder frames " + std::to_string(grid_.frames) +
                "x" + std::to_string(frame_height()) + "x" + std::to_string(frame_width()));
    const int p = config_.patch;
    Matrix patches(grid_.tokens(), p * p * 3);
    for (int f = 0; f < grid_.frames; ++f) {
        for (int y = 0; y < grid_.height; ++y) {
            for (int x = 0; x < grid_.width; ++x) {
                auto row = patches.row(grid_.index(f, y, x));
                for (int py = 0; py < p; ++py) {
                    for (int px = 0; px < p; ++px) {
                        for (int c = 0; c < 3; ++c) {
                            row[(py * p + px) * 3 + c] = video.at(f, y * p + py, x * p + px, c) - 0.5f;
                        }
                    }
                }
            }
        }
    }
    Matrix z = (patches * basis_) * static_cast<float>(1.0 / config_.scale);
    return LatentVideo(grid_, std::move(z));
}

Pipeline::Pipeline(ModelConfig model_config, DenoiseSchedule schedule, DecoderConfig decoder)
    : model_(std::make_shared<const Model>(std::move(model_config))),
      text_(model_->config().text_len, model_->config().text_embed_dim, mix_seed(model_->config().init_seed, 1)),
      decoder_(model_->config().latent_grid, model_->config().channel_dim, decoder),
      schedule_(schedule) {
    signal_levels(*model_, schedule_);  // validates the schedule against the model
}

LatentVideo Pipeline::initial_noise(std::uint64_t seed) const {
    const auto& cfg = model_->config();
    GaussianStream rng(seed);
    return LatentVideo(cfg.latent_grid, rng.matrix(cfg.visual_tokens(), cfg.channel_dim));
}

Matrix ddim_step(const Matrix& x, const Matrix& eps, double level_now, double level_next) {
    const double sa = std::sqrt(level_now);
    const double sn = std::sqrt(1.0 - level_now);
    const Matrix x0 = (x - static_cast<float>(sn) * eps) * static_cast<float>(1.0 / sa);
    return static_cast<float>(std::sqrt(level_next)) * x0 + static_cast<float>(std::sqrt(1.0 - level_next)) * eps;
}

namespace {

void check_finite(const Matrix& m, int step, const char* stream) {
    require(m.allFinite(), ErrorKind::numerical,
            std::string("non-finite latent in ") + stream + " stream at step " + std::to_string(step));
}

}  // namespace

SampleResult sample(const Pipeline& pipe, const std::string& prompt, std::uint64_t seed, const StepHooks& hooks,
                    const SampleOptions& options) {
    const Model& model = pipe.model();
    const auto levels = signal_levels(model, pipe.schedule());
    const PromptEmbedding embedding = pipe.text().embed(prompt);

    SampleResult result;
    LatentVideo z = options.initial ? *options.initial : pipe.initial_noise(seed);
    for (int i = 0; i < pipe.schedule().steps; ++i) {
        const HookMap step_hooks = hooks ? hooks(i) : HookMap{};
        ForwardResult fr = model.forward(z, embedding.rows, {i, pipe.schedule().train_timestep(i)}, step_hooks);
        check_finite(fr.noise_prediction.data, i, "sample");
        z.data = ddim_step(z.data, fr.noise_prediction.data, levels[static_cast<size_t>(i)],
                           levels[static_cast<size_t>(i) + 1]);
        check_finite(z.data, i, "sample");
        result.records.merge(fr.records);
        if (options.keep_trajectory) {
            result.trajectory.push_back(z);
        }
    }
    result.video = pipe.decoder().decode(z);
    result.latent = std::move(z);
    return result;
}

UniformCoupling::UniformCoupling(std::set<int> layers, int begin, int end, std::shared_ptr<const TokenMask> mask,
                                 bool block_text_to_visual)
    : layers_(std::move(layers)), begin_(begin), end_(end), mask_(std::move(mask)), block_text_(block_text_to_visual) {
    require(begin_ >= 0 && begin_ <= end_, ErrorKind::config,
            "coupling window [" + std::to_string(begin_) + ", " + std::to_string(end_) + ") is invalid");
}

HookMap UniformCoupling::source_hooks(int step) const {
    HookMap hooks;
    if (step >= begin_ && step < end_) {
        for (int l : layers_) {
            hooks[l].capture_kv = true;
        }
    }
    return hooks;
}

HookMap UniformCoupling::target_hooks(int step, const ForwardRecords& source) const {
    HookMap hooks;
    if (step < begin_ || step >= end_) {
        return hooks;
    }
    for (int l : layers_) {
        const auto it = source.kv.find({l, step});
        require(it != source.kv.end(), ErrorKind::missing_data,
                "no source KV captured for layer " + std::to_string(l) + " at step " + std::to_string(step));
        LayerHooks& h = hooks[l];
        h.inject = KvInjection{it->second, mask_};
        h.block_text_to_visual = block_text_;
    }
    return hooks;
}

PairedResult paired_sample(const Pipeline& pipe, const RunSpec& spec, Coupling& coupling) {
    const Model& model = pipe.model();
    const DenoiseSchedule& schedule = pipe.schedule();
    const auto levels = signal_levels(model, schedule);
    require(coupling.horizon() <= schedule.steps, ErrorKind::config,
            "plan window ends at step " + std::to_string(coupling.horizon()) + " but the schedule has " +
                std::to_string(schedule.steps) + " steps");

    const PromptEmbedding src_embed = pipe.text().embed(spec.source_prompt);
    const PromptEmbedding trg_embed = pipe.text().embed(spec.target_prompt);

    LatentVideo z_src = spec.initial ? *spec.initial : pipe.initial_noise(spec.seed);
    LatentVideo z_trg = z_src;

    PairedResult result;
    result.divergence.reserve(static_cast<size_t>(schedule.steps));
    for (int i = 0; i < schedule.steps; ++i) {
        const StepInfo step{i, schedule.train_timestep(i)};
        const ForwardResult fs = model.forward(z_src, src_embed.rows, step, coupling.source_hooks(i));
        const HookMap trg_hooks = coupling.target_hooks(i, fs.records);
        const ForwardResult ft = model.forward(z_trg, trg_embed.rows, step, trg_hooks);
        coupling.observe_target(i, ft.records);

        check_finite(fs.noise_prediction.data, i, "source");
        check_finite(ft.noise_prediction.data, i, "target");
        const double a = levels[static_cast<size_t>(i)];
        const double an = levels[static_cast<size_t>(i) + 1];
        z_src.data = ddim_step(z_src.data, fs.noise_prediction.data, a, an);
        z_trg.data = ddim_step(z_trg.data, ft.noise_prediction.data, a, an);
        check_finite(z_src.data, i, "source");
        check_finite(z_trg.data, i, "target");
        result.target_records.merge(ft.records);
        result.divergence.push_back(static_cast<double>((z_src.data - z_trg.data).norm()));
    }
    result.source_video = pipe.decoder().decode(z_src);
    result.target_video = pipe.decoder().decode(z_trg);
    result.source_latent = std::move(z_src);
    result.target_latent = std::move(z_trg);
    return result;
}

LatentVideo ddim_invert(const Pipeline& pipe, const LatentVideo& clean, const std::string& prompt,
                        const DenoiseSchedule& schedule) {
    const Model& model = pipe.model();
    const auto levels = signal_levels(model, schedule);
    const PromptEmbedding embedding = pipe.text().embed(prompt);
    LatentVideo x = clean;
    for (int i = schedule.steps - 1; i >= 0; --i) {
        const double a_from = levels[static_cast<size_t>(i) + 1];
        const double a_to = levels[static_cast<size_t>(i)];
        const ForwardResult fr = model.forward(x, embedding.rows, {i, schedule.train_timestep(i)});
        const Matrix& eps = fr.noise_prediction.data;
        const Matrix x0 = (x.data - static_cast<float>(std::sqrt(1.0 - a_from)) * eps) *
                          static_cast<float>(1.0 / std::sqrt(a_from));
        x.data = static_cast<float>(std::sqrt(a_to)) * x0 + static_cast<float>(std::sqrt(1.0 - a_to)) * eps;
        check_finite(x.data, i, "inversion");
    }
    return x;
}

LatentVideo ddim_invert(const Pipeline& pipe, const Video& video, const std::string& prompt) {
    return ddim_invert(pipe, pipe.decoder().encode(video), prompt, pipe.schedule());
}

}  // namespace kvedit
