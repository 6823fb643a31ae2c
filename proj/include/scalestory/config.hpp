// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scalestory/errors.hpp"
#include "scalestory/image.hpp"
#include "scalestory/orchestrator.hpp"

namespace scalestory {

inline const std::vector<double>& default_sweep() {
    static const std::vector<double> values{0.6, 0.7, 0.8, 0.85, 0.9};
    return values;
}

/// Everything a run needs; echoed verbatim into the manifest.
struct RunConfig {
    std::string story;
    std::string out = "out";
    uint64_t seed = 1;
    uint64_t model_seed = 2024;
    std::string schedule = "toy";  // toy | full | "1x1,2x2,..."
    double lambda = 0.85;
    std::vector<int> early_steps{2, 3};
    double cfg_scale = 3.0;
    int batch_size = 4;
    double temperature = 0.0;
    bool enable_ipr = true;
    bool enable_asi = true;
    bool enable_sga = true;
    std::string alpha_scope = "per_layer";
    int pixel_scale = 0;
    std::vector<double> sweep;

    bool operator==(const RunConfig&) const = default;
};

inline nlohmann::json to_json(const RunConfig& c) {
    return {{"story", c.story},
            {"out", c.out},
            {"seed", c.seed},
            {"model_seed", c.model_seed},
            {"schedule", c.schedule},
            {"lambda", c.lambda},
            {"early_steps", c.early_steps},
            {"cfg_scale", c.cfg_scale},
            {"batch_size", c.batch_size},
            {"temperature", c.temperature},
            {"enable_ipr", c.enable_ipr},
            {"enable_asi", c.enable_asi},
            {"enable_sga", c.enable_sga},
            {"alpha_scope", c.alpha_scope},
            {"pixel_scale", c.pixel_scale},
            {"sweep", c.sweep}};
}

/// Overlays the keys present in `j` onto `base`. Unknown keys are an error.
inline RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {}) {
    if (!j.is_object()) throw ValidationError("config must be an object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "story") base.story = v.get<std::string>();
            else if (key == "out") base.out = v.get<std::string>();
            else if (key == "seed") base.seed = v.get<uint64_t>();
            else if (key == "model_seed") base.model_seed = v.get<uint64_t>();
            else if (key == "schedule") base.schedule = v.get<std::string>();
            else if (key == "lambda") base.lambda = v.get<double>();
            else if (key == "early_steps") base.early_steps = v.get<std::vector<int>>();
            else if (key == "cfg_scale") base.cfg_scale = v.get<double>();
            else if (key == "batch_size") base.batch_size = v.get<int>();
            else if (key == "temperature") base.temperature = v.get<double>();
            else if (key == "enable_ipr") base.enable_ipr = v.get<bool>();
            else if (key == "enable_asi") base.enable_asi = v.get<bool>();
            else if (key == "enable_sga") base.enable_sga = v.get<bool>();
            else if (key == "alpha_scope") base.alpha_scope = v.get<std::string>();
            else if (key == "pixel_scale") base.pixel_scale = v.get<int>();
            else if (key == "sweep") base.sweep = v.get<std::vector<double>>();
            else throw ValidationError("unknown config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    return base;
}

inline RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {}) {
    const auto bytes = read_file_bytes(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j, std::move(base));
}

inline ScaleSchedule schedule_from_config(const RunConfig& c) {
    std::set<int> early(c.early_steps.begin(), c.early_steps.end());
    if (c.schedule == "toy") return make_schedule(toy_schedule().sizes, early);
    if (c.schedule == "full") return make_schedule(full_schedule().sizes, early);
    return make_schedule(parse_sizes(c.schedule), early);
}

inline GenerationConfig to_generation_config(const RunConfig& c) {
    GenerationConfig g;
    g.schedule = schedule_from_config(c);
    g.guidance.lambda = c.lambda;
    g.guidance.early_steps = g.schedule.early_steps;
    g.guidance.cfg_scale = c.cfg_scale;
    g.guidance.enable_ipr = c.enable_ipr;
    g.guidance.enable_asi = c.enable_asi;
    g.guidance.enable_sga = c.enable_sga;
    if (c.alpha_scope == "per_layer") g.guidance.alpha_scope = AlphaScope::per_layer;
    else if (c.alpha_scope == "per_step") g.guidance.alpha_scope = AlphaScope::per_step;
    else throw ValidationError("alpha_scope must be per_layer or per_step");
    g.global_seed = c.seed;
    g.model_seed = c.model_seed;
    g.batch_size = c.batch_size;
    g.temperature = c.temperature;
    g.pixel_scale = c.pixel_scale;
    validate_generation(g);
    return g;
}

}  // namespace scalestory
