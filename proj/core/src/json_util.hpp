#pragma once

// Internal JSON helpers shared by checkpoint and run-config code. Not
// installed; public headers stay free of nlohmann types.

#include <json.hpp>

#include "kgfuse/errors.hpp"
#include "kgfuse/model.hpp"

namespace kgfuse::detail {

using json = nlohmann::ordered_json;

inline json model_config_to_json(const ModelConfig& cfg) {
    json j;
    j["d_t"] = cfg.d_t;
    j["d_v"] = cfg.d_v;
    j["d"] = cfg.d;
    j["num_heads"] = cfg.num_heads;
    j["num_layers"] = cfg.num_layers;
    j["d_hidden"] = cfg.d_hidden;
    j["num_classes"] = cfg.num_classes;
    j["fusion"] = to_string(cfg.fusion);
    j["use_global_concat"] = cfg.use_global_concat;
    j["use_knowledge"] = cfg.use_knowledge;
    j["leaky_slope"] = cfg.leaky_slope;
    j["seed"] = cfg.seed;
    return j;
}

template <typename Target>
void read_field(const json& obj, const char* key, Target& target, const char* context) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw ValidationError(std::string(context) + ": missing field '" + key + "'");
    }
    try {
        target = it->get<Target>();
    } catch (const json::exception&) {
        throw ValidationError(std::string(context) + ": field '" + key + "' has the wrong type");
    }
}

inline void reject_unknown(const json& obj, const std::vector<std::string>& known,
                           const char* context) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            throw ValidationError(std::string(context) + ": unknown key '" + it.key() + "'");
        }
    }
}

inline ModelConfig model_config_from_json(const json& j, const char* context) {
    if (!j.is_object()) throw ValidationError(std::string(context) + ": expected an object");
    reject_unknown(j,
                   {"d_t", "d_v", "d", "num_heads", "num_layers", "d_hidden", "num_classes",
                    "fusion", "use_global_concat", "use_knowledge", "leaky_slope", "seed"},
                   context);
    ModelConfig cfg;
    if (j.contains("d_t")) read_field(j, "d_t", cfg.d_t, context);
    if (j.contains("d_v")) read_field(j, "d_v", cfg.d_v, context);
    if (j.contains("d")) read_field(j, "d", cfg.d, context);
    if (j.contains("num_heads")) read_field(j, "num_heads", cfg.num_heads, context);
    if (j.contains("num_layers")) read_field(j, "num_layers", cfg.num_layers, context);
    if (j.contains("d_hidden")) read_field(j, "d_hidden", cfg.d_hidden, context);
    if (j.contains("num_classes")) read_field(j, "num_classes", cfg.num_classes, context);
    if (j.contains("fusion")) {
        std::string fusion;
        read_field(j, "fusion", fusion, context);
        cfg.fusion = fusion_from_string(fusion);
    }
    if (j.contains("use_global_concat")) {
        read_field(j, "use_global_concat", cfg.use_global_concat, context);
    }
    if (j.contains("use_knowledge")) read_field(j, "use_knowledge", cfg.use_knowledge, context);
    if (j.contains("leaky_slope")) read_field(j, "leaky_slope", cfg.leaky_slope, context);
    if (j.contains("seed")) read_field(j, "seed", cfg.seed, context);
    cfg.validate();
    return cfg;
}

} // namespace kgfuse::detail
