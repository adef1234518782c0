// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvedit/config.hpp"

#include "kvedit/error.hpp"
#include "kvedit/probe.hpp"

#include <charconv>
#include <set>

namespace kvedit {

namespace {

// Reads one JSON object section, remembering which keys were consumed so the
// leftovers can be reported as unknown.
class Section {
public:
    Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        require(j.is_object(), ErrorKind::config, "config: '" + label() + "' must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) {
            return;
        }
        try {
            if constexpr (std::is_same_v<T, bool>) {
                require(it->is_boolean(), ErrorKind::config, "");
            } else if constexpr (std::is_arithmetic_v<T>) {
                require(it->is_number(), ErrorKind::config, "");
                if constexpr (std::is_integral_v<T>) {
                    require(it->is_number_integer(), ErrorKind::config, "");
                }
            }
            out = it->template get<T>();
        } catch (const std::exception&) {
            fail(ErrorKind::config, "config: key '" + name(key) + "' has the wrong type");
        }
    }

    template <typename T>
    void get(const char* key, std::optional<T>& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) {
            return;
        }
        T v{};
        get(key, v);
        out = v;
    }

    Section sub(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        static const Json empty = Json::object();
        return Section(it == j_.end() ? empty : *it, name(key));
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            require(seen_.count(k), ErrorKind::config, "config: unknown key '" + name(k) + "'");
        }
    }

private:
    std::string label() const { return path_.empty() ? "<root>" : path_; }
    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace

InjectionPlan ExperimentConfig::plan(EditMode mode) const {
    InjectionPlan p = InjectionPlan::defaults_for(model, mode);
    p.t_i = edit.t_i;
    p.t_e = edit.t_e;
    p.preserve_prompt = edit.preserve_prompt;
    p.use_vital_for_non_rigid = edit.use_vital_for_non_rigid;
    p.mask.k = edit.k;
    p.mask.c_k = edit.c_k;
    p.mask.blur_kernel = edit.blur_kernel;
    p.mask.blur_sigma = edit.blur_sigma;
    p.mask.threshold = edit.t_mask;
    p.mask.window = edit.mask_window;
    if (edit.vital_layers) {
        p.vital_layers = *edit.vital_layers;
    }
    if (edit.non_vital_layers) {
        p.non_vital_layers = *edit.non_vital_layers;
    }
    if (edit.prominent_layer) {
        p.prominent_layer = *edit.prominent_layer;
    }
    return p;
}

Pipeline ExperimentConfig::pipeline() const {
    ModelConfig m = model;
    m.train_timesteps = schedule.train_timesteps;
    return Pipeline(m, schedule, decoder);
}

void ExperimentConfig::validate() const {
    model.validate();
    schedule.validate();
    require(decoder.patch > 0 && decoder.scale > 0, ErrorKind::config, "config: decoder patch and scale must be positive");
    require(workers >= 1, ErrorKind::config, "config: workers must be >= 1");
    require(probe.n_p >= 1 && probe.n_p <= static_cast<int>(bundled_prompts().size()), ErrorKind::config,
            "config: probe.n_p must be in 1.." + std::to_string(bundled_prompts().size()));
    require(probe.c > 0, ErrorKind::config, "config: probe.c must be positive");
    require(probe.top_k >= 1 && probe.top_k <= model.num_layers, ErrorKind::config,
            "config: probe.top_k must be in 1..num_layers");
    plan(EditMode::object_addition).mask.validate();
    auto check_layers = [&](const std::optional<std::vector<int>>& layers, const char* key) {
        if (!layers) {
            return;
        }
        for (int l : *layers) {
            require(l >= 0 && l < model.num_layers, ErrorKind::config,
                    std::string("config: edit.") + key + " has layer " + std::to_string(l) + " outside 0.." +
                        std::to_string(model.num_layers - 1));
        }
    };
    check_layers(edit.vital_layers, "vital_layers");
    check_layers(edit.non_vital_layers, "non_vital_layers");
}

Json ExperimentConfig::to_json() const {
    Json m = {
        {"num_layers", model.num_layers},
        {"num_heads", model.num_heads},
        {"head_dim", model.head_dim},
        {"model_dim", model.model_dim},
        {"mlp_dim", model.mlp_dim},
        {"text_len", model.text_len},
        {"text_embed_dim", model.text_embed_dim},
        {"frames", model.latent_grid.frames},
        {"height", model.latent_grid.height},
        {"width", model.latent_grid.width},
        {"channel_dim", model.channel_dim},
        {"init_seed", model.init_seed},
        {"rope_theta", model.rope_theta},
        {"beta_start", model.beta_start},
        {"beta_end", model.beta_end},
        {"text_bias", model.text_bias},
        {"rope_free_layers", std::vector<int>(model.rope_free_layers.begin(), model.rope_free_layers.end())},
    };
    Json e = {
        {"t_i", edit.t_i},
        {"t_e", edit.t_e},
        {"t_mask", edit.t_mask},
        {"k", edit.k},
        {"c_k", edit.c_k},
        {"blur_kernel", edit.blur_kernel},
        {"blur_sigma", edit.blur_sigma},
        {"mask_window", edit.mask_window},
        {"preserve_prompt", edit.preserve_prompt},
        {"use_vital_for_non_rigid", edit.use_vital_for_non_rigid},
    };
    // Store the resolved lists so a snapshot does not depend on future defaults.
    const InjectionPlan p = plan(EditMode::object_addition);
    e["vital_layers"] = p.vital_layers;
    e["non_vital_layers"] = p.non_vital_layers;
    e["prominent_layer"] = p.prominent_layer;
    return {
        {"model", m},
        {"sampler", {{"steps", schedule.steps}, {"train_timesteps", schedule.train_timesteps}}},
        {"decoder", {{"patch", decoder.patch}, {"scale", decoder.scale}, {"seed", decoder.seed}}},
        {"edit", e},
        {"probe",
         {{"n_p", probe.n_p},
          {"c", probe.c},
          {"per_prompt", probe.per_prompt},
          {"top_k", probe.top_k},
          {"luminance_k", probe.luminance_k}}},
        {"seed", seed},
        {"workers", workers},
    };
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
    ExperimentConfig c;
    Section root(j, "");
    {
        Section m = root.sub("model");
        m.get("num_layers", c.model.num_layers);
        m.get("num_heads", c.model.num_heads);
        m.get("head_dim", c.model.head_dim);
        m.get("model_dim", c.model.model_dim);
        m.get("mlp_dim", c.model.mlp_dim);
        m.get("text_len", c.model.text_len);
        m.get("text_embed_dim", c.model.text_embed_dim);
        m.get("frames", c.model.latent_grid.frames);
        m.get("height", c.model.latent_grid.height);
        m.get("width", c.model.latent_grid.width);
        m.get("channel_dim", c.model.channel_dim);
        m.get("init_seed", c.model.init_seed);
        m.get("rope_theta", c.model.rope_theta);
        m.get("beta_start", c.model.beta_start);
        m.get("beta_end", c.model.beta_end);
        m.get("text_bias", c.model.text_bias);
        std::vector<int> rope_free;
        m.get("rope_free_layers", rope_free);
        c.model.rope_free_layers = {rope_free.begin(), rope_free.end()};
        m.finish();
    }
    {
        Section s = root.sub("sampler");
        s.get("steps", c.schedule.steps);
        s.get("train_timesteps", c.schedule.train_timesteps);
        s.finish();
        c.model.train_timesteps = c.schedule.train_timesteps;
    }
    {
        Section d = root.sub("decoder");
        d.get("patch", c.decoder.patch);
        d.get("scale", c.decoder.scale);
        d.get("seed", c.decoder.seed);
        d.finish();
    }
    {
        Section e = root.sub("edit");
        e.get("t_i", c.edit.t_i);
        e.get("t_e", c.edit.t_e);
        e.get("t_mask", c.edit.t_mask);
        e.get("k", c.edit.k);
        e.get("c_k", c.edit.c_k);
        e.get("blur_kernel", c.edit.blur_kernel);
        e.get("blur_sigma", c.edit.blur_sigma);
        e.get("mask_window", c.edit.mask_window);
        e.get("preserve_prompt", c.edit.preserve_prompt);
        e.get("use_vital_for_non_rigid", c.edit.use_vital_for_non_rigid);
        e.get("vital_layers", c.edit.vital_layers);
        e.get("non_vital_layers", c.edit.non_vital_layers);
        e.get("prominent_layer", c.edit.prominent_layer);
        e.finish();
    }
    {
        Section p = root.sub("probe");
        p.get("n_p", c.probe.n_p);
        p.get("c", c.probe.c);
        p.get("per_prompt", c.probe.per_prompt);
        p.get("top_k", c.probe.top_k);
        p.get("luminance_k", c.probe.luminance_k);
        p.finish();
    }
    root.get("seed", c.seed);
    root.get("workers", c.workers);
    root.finish();
    return c;
}

std::vector<int> parse_int_list(std::string_view text) {
    std::vector<int> out;
    size_t pos = 0;
    while (pos <= text.size()) {
        const size_t end = std::min(text.find(',', pos), text.size());
        const std::string_view item = text.substr(pos, end - pos);
        int v = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        require(!item.empty() && ec == std::errc{} && ptr == item.data() + item.size(), ErrorKind::usage,
                "expected a comma-separated integer list, got '" + std::string(text) + "'");
        out.push_back(v);
        pos = end + 1;
    }
    return out;
}

}  // namespace kvedit
