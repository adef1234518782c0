// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#include "kvedit/report.hpp"

#include "kvedit/error.hpp"

namespace kvedit {

namespace {

// Collects absent keys so one error can name all of them.
class Fields {
public:
    Fields(const Json& j, std::string what) : j_(j), what_(std::move(what)) {
        require(j.is_object(), ErrorKind::format, what_ + ": expected a JSON object");
    }

    template <typename T>
    T get(const char* key, T fallback = T{}) {
        auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) {
            missing_.push_back(key);
            return fallback;
        }
        try {
            return it->template get<T>();
        } catch (const std::exception&) {
            fail(ErrorKind::format, what_ + ": field '" + key + "' has the wrong type");
        }
    }

    template <typename T>
    std::optional<T> optional(const char* key) {
        auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) {
            return std::nullopt;
        }
        return get<T>(key);
    }

    void finish() const {
        if (missing_.empty()) {
            return;
        }
        std::string list;
        for (const auto& m : missing_) {
            list += (list.empty() ? "" : ", ") + m;
        }
        fail(ErrorKind::missing_data, what_ + " is incomplete; missing: " + list);
    }

private:
    const Json& j_;
    std::string what_;
    std::vector<std::string> missing_;
};

Json grid_json(const LatentGrid& g) {
    return {g.frames, g.height, g.width};
}

}  // namespace

Json to_json(const VitalityReport& r) {
    Json j = {
        {"vitality_layer", r.vitality_layer},
        {"vitality_rope", r.vitality_rope},
        {"n_prompts", r.n_prompts},
        {"embedder", r.embedder},
    };
    j["pearson_r"] = r.pearson_r ? Json(*r.pearson_r) : Json(nullptr);
    return j;
}

VitalityReport vitality_from_json(const Json& j) {
    Fields f(j, "vitality report");
    VitalityReport r;
    r.vitality_layer = f.get<std::vector<double>>("vitality_layer");
    r.vitality_rope = f.get<std::vector<double>>("vitality_rope");
    r.n_prompts = f.get<int>("n_prompts");
    r.embedder = f.get<std::string>("embedder");
    r.pearson_r = f.optional<double>("pearson_r");
    f.finish();
    require(r.vitality_layer.size() == r.vitality_rope.size(), ErrorKind::format,
            "vitality report: curves have different lengths");
    return r;
}

Json to_json(const ProminenceReport& r) {
    return {
        {"per_prompt", r.per_prompt},
        {"c", r.c},
        {"psnr_cap", r.psnr_cap},
        {"psnr_fg_prompt", r.psnr_fg_prompt},
        {"psnr_bg_prompt", r.psnr_bg_prompt},
        {"psnr_fg", r.psnr_fg},
        {"psnr_bg", r.psnr_bg},
        {"psnr_min", r.psnr_min},
        {"psnr_max", r.psnr_max},
        {"s_fg", r.s_fg},
        {"s_bg", r.s_bg},
        {"p", r.p},
        {"selected_layer", r.selected_layer},
        {"included_prompts", r.included_prompts},
        {"excluded_layers", r.excluded_layers},
        {"notes", r.notes},
    };
}

ProminenceReport prominence_from_json(const Json& j) {
    Fields f(j, "prominence report");
    ProminenceReport r;
    r.per_prompt = f.get<bool>("per_prompt");
    r.c = f.get<double>("c");
    r.psnr_cap = f.get<double>("psnr_cap");
    r.psnr_fg_prompt = f.get<std::vector<std::vector<double>>>("psnr_fg_prompt");
    r.psnr_bg_prompt = f.get<std::vector<std::vector<double>>>("psnr_bg_prompt");
    r.psnr_fg = f.get<std::vector<double>>("psnr_fg");
    r.psnr_bg = f.get<std::vector<double>>("psnr_bg");
    r.psnr_min = f.get<double>("psnr_min");
    r.psnr_max = f.get<double>("psnr_max");
    r.s_fg = f.get<std::vector<double>>("s_fg");
    r.s_bg = f.get<std::vector<double>>("s_bg");
    r.p = f.get<std::vector<double>>("p");
    r.selected_layer = f.get<int>("selected_layer", -1);
    r.included_prompts = f.get<std::vector<int>>("included_prompts");
    r.excluded_layers = f.get<std::vector<int>>("excluded_layers");
    r.notes = f.get<std::vector<std::string>>("notes");
    f.finish();
    return r;
}

Json to_json(const MetricReport& r) {
    Json samples = Json::array();
    for (const auto& s : r.samples) {
        samples.push_back({
            {"src_prompt", s.src_prompt},
            {"trg_prompt", s.trg_prompt},
            {"clip_dir", s.clip_dir},
            {"clip_dir_degenerate", s.clip_dir_degenerate},
            {"clip_img", s.clip_img},
            {"tf", s.tf},
            {"ms", s.ms},
            {"sc", s.sc},
            {"bc", s.bc},
        });
    }
    return {
        {"clip_dir", r.clip_dir},
        {"clip_img", r.clip_img},
        {"clip_all", r.clip_all},
        {"tf", r.tf},
        {"ms", r.ms},
        {"sc", r.sc},
        {"bc", r.bc},
        {"overall", r.overall},
        {"clip_all_order", r.order == ClipAllOrder::product_of_means ? "product_of_means" : "mean_of_products"},
        {"samples", samples},
        {"embedder", r.embedder},
        {"proxies", r.proxies},
    };
}

MetricReport metrics_from_json(const Json& j) {
    Fields f(j, "metric report");
    MetricReport r;
    r.clip_dir = f.get<double>("clip_dir");
    r.clip_img = f.get<double>("clip_img");
    r.clip_all = f.get<double>("clip_all");
    r.tf = f.get<double>("tf");
    r.ms = f.get<double>("ms");
    r.sc = f.get<double>("sc");
    r.bc = f.get<double>("bc");
    r.overall = f.get<double>("overall");
    const auto order = f.get<std::string>("clip_all_order", "product_of_means");
    r.order = order == "mean_of_products" ? ClipAllOrder::mean_of_products : ClipAllOrder::product_of_means;
    r.embedder = f.get<std::string>("embedder");
    r.proxies = f.get<std::string>("proxies");
    const Json samples = f.get<Json>("samples", Json::array());
    f.finish();
    for (const auto& sj : samples) {
        Fields g(sj, "metric sample");
        SampleMetrics s;
        s.src_prompt = g.get<std::string>("src_prompt");
        s.trg_prompt = g.get<std::string>("trg_prompt");
        s.clip_dir = g.get<double>("clip_dir");
        s.clip_dir_degenerate = g.get<bool>("clip_dir_degenerate");
        s.clip_img = g.get<double>("clip_img");
        s.tf = g.get<double>("tf");
        s.ms = g.get<double>("ms");
        s.sc = g.get<double>("sc");
        s.bc = g.get<double>("bc");
        g.finish();
        r.samples.push_back(std::move(s));
    }
    return r;
}

Json to_json(const DeltaTokens& d) {
    Json runs = Json::array();
    for (const auto& [b, e] : d.runs) {
        runs.push_back({b, e});
    }
    return {{"indices", d.indices}, {"words", d.words}, {"runs", runs}};
}

Json to_json(const EditMask& m) {
    return {
        {"grid", grid_json(m.grid)},
        {"count", m.count()},
        {"layer", m.layer},
        {"steps", m.steps},
        {"degenerate", m.degenerate},
        {"warnings", m.warnings},
    };
}

Json to_json(const std::vector<ProbeFailure>& failures) {
    Json out = Json::array();
    for (const auto& f : failures) {
        out.push_back({{"prompt", f.prompt}, {"layer", f.layer}, {"message", f.message}});
    }
    return out;
}

Tensor mask_tensor(const EditMask& m) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(m.grid.frames), static_cast<std::uint32_t>(m.grid.height),
              static_cast<std::uint32_t>(m.grid.width)};
    t.data.assign(m.bits.begin(), m.bits.end());
    return t;
}

Tensor map_tensor(const GridMap& m) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(m.grid.frames), static_cast<std::uint32_t>(m.grid.height),
              static_cast<std::uint32_t>(m.grid.width)};
    t.data.assign(m.values.begin(), m.values.end());
    return t;
}

GridMap map_from_tensor(const Tensor& t) {
    require(t.dims.size() == 3, ErrorKind::format, "attention map tensor must be [F, H, W]");
    GridMap m(LatentGrid{static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2])});
    std::copy(t.data.begin(), t.data.end(), m.values.begin());
    return m;
}

}  // namespace kvedit
