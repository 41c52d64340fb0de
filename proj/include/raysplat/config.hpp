// JSON configuration mirroring RenderConfig / LossConfig / TrainConfig.
// Unknown keys are rejected; validation errors name the offending field.
#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "raysplat/train.hpp"

namespace raysplat {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace configdetail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::set<std::string>& known,
                           const std::string& section) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("config: unknown key '" + section + it.key() + "'");
}

template <typename T>
T get_num(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ConfigError("config: '" + key + "' must be a number");
    return T(j[key].get<double>());
}

inline int get_int(const json& j, const std::string& key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) throw ConfigError("config: '" + key + "' must be an integer");
    return j[key].get<int>();
}

inline bool get_bool(const json& j, const std::string& key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) throw ConfigError("config: '" + key + "' must be a boolean");
    return j[key].get<bool>();
}

template <typename T>
Vec3<T> get_vec3(const json& j, const std::string& key, const Vec3<T>& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_array() || j[key].size() != 3)
        throw ConfigError("config: '" + key + "' must be a 3-element array");
    return {T(j[key][0].get<double>()), T(j[key][1].get<double>()), T(j[key][2].get<double>())};
}

} // namespace configdetail

// Extra knobs only the CLI needs.
template <typename T>
struct InitConfig {
    int count = 2000;
    T scale_fraction = T(0.01);
    T box_half_extent = T(0.5); // init box around the origin after normalization
};

template <typename T>
struct AppConfig {
    TrainConfig<T> train;
    InitConfig<T> init;
};

template <typename T>
void validate(const RenderConfig<T>& r) {
    if (!(r.q > T(0))) throw ConfigError("config: 'render.q' must be > 0");
    if (!(r.epsilon1 > T(0) && r.epsilon1 < T(1)))
        throw ConfigError("config: 'render.epsilon1' must be in (0,1)");
    if (!(r.epsilon2 > T(0) && r.epsilon2 < T(1)))
        throw ConfigError("config: 'render.epsilon2' must be in (0,1)");
    if (r.max_hits < 1) throw ConfigError("config: 'render.max_hits' must be >= 1");
    if (r.t_advance_delta < T(0))
        throw ConfigError("config: 'render.t_advance_delta' must be >= 0 (0 = auto)");
}

template <typename T>
void validate(const TrainConfig<T>& t) {
    validate(t.render);
    if (!(t.loss.lambda >= T(0) && t.loss.lambda <= T(1)))
        throw ConfigError("config: 'loss.lambda' must be in [0,1]");
    if (t.loss.ssim_radius < 1) throw ConfigError("config: 'loss.ssim_radius' must be >= 1");
    if (t.iterations < 0) throw ConfigError("config: 'train.iterations' must be >= 0");
    if (t.densify_interval < 1) throw ConfigError("config: 'train.densify_interval' must be >= 1");
    if (!(t.densify.grad_threshold > T(0)))
        throw ConfigError("config: 'train.densify_grad_threshold' must be > 0");
    if (!(t.densify.split_scale_threshold > T(0)))
        throw ConfigError("config: 'train.split_scale_threshold' must be > 0");
    if (!(t.densify.prune_opacity_threshold > T(0)))
        throw ConfigError("config: 'train.prune_opacity_threshold' must be > 0");
}

template <typename T>
AppConfig<T> parse_config(const nlohmann::json& j) {
    using namespace configdetail;
    AppConfig<T> cfg;
    reject_unknown(j, {"render", "loss", "train", "init"}, "");

    if (j.contains("render")) {
        const auto& r = j["render"];
        reject_unknown(r, {"q", "epsilon1", "epsilon2", "max_hits", "t_advance_delta",
                           "background"},
                       "render.");
        auto& rc = cfg.train.render;
        rc.q = get_num<T>(r, "q", rc.q);
        rc.epsilon1 = get_num<T>(r, "epsilon1", rc.epsilon1);
        rc.epsilon2 = get_num<T>(r, "epsilon2", rc.epsilon2);
        rc.max_hits = get_int(r, "max_hits", rc.max_hits);
        rc.t_advance_delta = get_num<T>(r, "t_advance_delta", rc.t_advance_delta);
        rc.background_color = get_vec3<T>(r, "background", rc.background_color);
    }
    if (j.contains("loss")) {
        const auto& l = j["loss"];
        reject_unknown(l, {"lambda", "ssim_radius", "ssim_sigma"}, "loss.");
        cfg.train.loss.lambda = get_num<T>(l, "lambda", cfg.train.loss.lambda);
        cfg.train.loss.ssim_radius = get_int(l, "ssim_radius", cfg.train.loss.ssim_radius);
        cfg.train.loss.ssim_sigma = get_num<T>(l, "ssim_sigma", cfg.train.loss.ssim_sigma);
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        reject_unknown(t,
                       {"iterations", "lr_mean", "lr_scale", "lr_rotation", "lr_opacity",
                        "lr_color", "densify_enabled", "densify_interval", "densify_start",
                        "densify_end", "densify_grad_threshold", "split_scale_threshold",
                        "prune_opacity_threshold", "densify_use_grad_norm_mean",
                        "checkpoint_interval", "seed"},
                       "train.");
        auto& tc = cfg.train;
        tc.iterations = get_int(t, "iterations", tc.iterations);
        tc.lr.mean = get_num<T>(t, "lr_mean", tc.lr.mean);
        tc.lr.scale_logits = get_num<T>(t, "lr_scale", tc.lr.scale_logits);
        tc.lr.rotation = get_num<T>(t, "lr_rotation", tc.lr.rotation);
        tc.lr.opacity_logit = get_num<T>(t, "lr_opacity", tc.lr.opacity_logit);
        tc.lr.color = get_num<T>(t, "lr_color", tc.lr.color);
        tc.densify_enabled = get_bool(t, "densify_enabled", tc.densify_enabled);
        tc.densify_interval = get_int(t, "densify_interval", tc.densify_interval);
        tc.densify_start = get_int(t, "densify_start", tc.densify_start);
        tc.densify_end = get_int(t, "densify_end", tc.densify_end);
        tc.densify.grad_threshold = get_num<T>(t, "densify_grad_threshold",
                                               tc.densify.grad_threshold);
        tc.densify.split_scale_threshold =
            get_num<T>(t, "split_scale_threshold", tc.densify.split_scale_threshold);
        tc.densify.prune_opacity_threshold =
            get_num<T>(t, "prune_opacity_threshold", tc.densify.prune_opacity_threshold);
        tc.densify.use_grad_norm_mean =
            get_bool(t, "densify_use_grad_norm_mean", tc.densify.use_grad_norm_mean);
        tc.checkpoint_interval = get_int(t, "checkpoint_interval", tc.checkpoint_interval);
        tc.seed = std::uint64_t(get_int(t, "seed", int(tc.seed)));
    }
    if (j.contains("init")) {
        const auto& i = j["init"];
        reject_unknown(i, {"count", "scale_fraction", "box_half_extent"}, "init.");
        cfg.init.count = get_int(i, "count", cfg.init.count);
        cfg.init.scale_fraction = get_num<T>(i, "scale_fraction", cfg.init.scale_fraction);
        cfg.init.box_half_extent = get_num<T>(i, "box_half_extent", cfg.init.box_half_extent);
    }

    validate(cfg.train);
    if (cfg.init.count < 1) throw ConfigError("config: 'init.count' must be >= 1");
    return cfg;
}

template <typename T>
AppConfig<T> load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: malformed JSON in '" + path + "': " + e.what());
    }
    return parse_config<T>(j);
}

// Snapshot of the effective configuration, written next to checkpoints.
template <typename T>
nlohmann::json config_snapshot(const AppConfig<T>& cfg) {
    nlohmann::json j;
    j["render"] = {{"q", double(cfg.train.render.q)},
                   {"epsilon1", double(cfg.train.render.epsilon1)},
                   {"epsilon2", double(cfg.train.render.epsilon2)},
                   {"max_hits", cfg.train.render.max_hits},
                   {"t_advance_delta", double(cfg.train.render.t_advance_delta)},
                   {"background",
                    {double(cfg.train.render.background_color.x),
                     double(cfg.train.render.background_color.y),
                     double(cfg.train.render.background_color.z)}}};
    j["loss"] = {{"lambda", double(cfg.train.loss.lambda)},
                 {"ssim_radius", cfg.train.loss.ssim_radius},
                 {"ssim_sigma", double(cfg.train.loss.ssim_sigma)}};
    j["train"] = {{"iterations", cfg.train.iterations},
                  {"lr_mean", double(cfg.train.lr.mean)},
                  {"lr_scale", double(cfg.train.lr.scale_logits)},
                  {"lr_rotation", double(cfg.train.lr.rotation)},
                  {"lr_opacity", double(cfg.train.lr.opacity_logit)},
                  {"lr_color", double(cfg.train.lr.color)},
                  {"densify_enabled", cfg.train.densify_enabled},
                  {"densify_interval", cfg.train.densify_interval},
                  {"densify_start", cfg.train.densify_start},
                  {"densify_end", cfg.train.densify_end},
                  {"densify_grad_threshold", double(cfg.train.densify.grad_threshold)},
                  {"split_scale_threshold", double(cfg.train.densify.split_scale_threshold)},
                  {"prune_opacity_threshold", double(cfg.train.densify.prune_opacity_threshold)},
                  {"densify_use_grad_norm_mean", cfg.train.densify.use_grad_norm_mean},
                  {"checkpoint_interval", cfg.train.checkpoint_interval},
                  {"seed", cfg.train.seed}};
    j["init"] = {{"count", cfg.init.count},
                 {"scale_fraction", double(cfg.init.scale_fraction)},
                 {"box_half_extent", double(cfg.init.box_half_extent)}};
    return j;
}

} // namespace raysplat
