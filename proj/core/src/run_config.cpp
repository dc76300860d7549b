#include "kgfuse/run_config.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace kgfuse {

using detail::json;

namespace {

json train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["learning_rate"] = cfg.learning_rate;
    j["batch_size"] = cfg.batch_size;
    j["epochs"] = cfg.epochs;
    j["seed"] = cfg.seed;
    j["shuffle"] = cfg.shuffle;
    j["early_stop_patience"] = cfg.early_stop_patience;
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    detail::reject_unknown(
        j, {"learning_rate", "batch_size", "epochs", "seed", "shuffle", "early_stop_patience"},
        "train config");
    TrainConfig cfg;
    if (j.contains("learning_rate")) detail::read_field(j, "learning_rate", cfg.learning_rate, "train config");
    if (j.contains("batch_size")) detail::read_field(j, "batch_size", cfg.batch_size, "train config");
    if (j.contains("epochs")) detail::read_field(j, "epochs", cfg.epochs, "train config");
    if (j.contains("seed")) detail::read_field(j, "seed", cfg.seed, "train config");
    if (j.contains("shuffle")) detail::read_field(j, "shuffle", cfg.shuffle, "train config");
    if (j.contains("early_stop_patience")) {
        detail::read_field(j, "early_stop_patience", cfg.early_stop_patience, "train config");
    }
    cfg.validate();
    return cfg;
}

json ingest_to_json(const FilterOptions& cfg) {
    json j;
    j["text_threshold"] = cfg.text_threshold;
    j["visual_threshold"] = cfg.visual_threshold;
    j["max_per_source"] = cfg.max_per_source;
    return j;
}

FilterOptions ingest_from_json(const json& j) {
    detail::reject_unknown(j, {"text_threshold", "visual_threshold", "max_per_source"},
                           "ingest config");
    FilterOptions cfg;
    if (j.contains("text_threshold")) detail::read_field(j, "text_threshold", cfg.text_threshold, "ingest config");
    if (j.contains("visual_threshold")) detail::read_field(j, "visual_threshold", cfg.visual_threshold, "ingest config");
    if (j.contains("max_per_source")) detail::read_field(j, "max_per_source", cfg.max_per_source, "ingest config");
    if (cfg.text_threshold < 0.0 || cfg.text_threshold > 1.0 || cfg.visual_threshold < 0.0 ||
        cfg.visual_threshold > 1.0) {
        throw ValidationError("ingest config: thresholds must lie in [0, 1]");
    }
    if (cfg.max_per_source < 0) {
        throw ValidationError("ingest config: max_per_source must be non-negative");
    }
    return cfg;
}

json synthetic_to_json(const SyntheticSpec& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["num_classes"] = cfg.num_classes;
    j["records_per_class"] = cfg.records_per_class;
    j["d_t"] = cfg.d_t;
    j["d_v"] = cfg.d_v;
    j["text_entities_per_record"] = cfg.text_entities_per_record;
    j["key_phrases_per_record"] = cfg.key_phrases_per_record;
    j["visual_objects_per_record"] = cfg.visual_objects_per_record;
    j["noise_items_per_record"] = cfg.noise_items_per_record;
    j["label_signal"] = to_string(cfg.label_signal);
    return j;
}

SyntheticSpec synthetic_from_json(const json& j) {
    detail::reject_unknown(j,
                           {"seed", "num_classes", "records_per_class", "d_t", "d_v",
                            "text_entities_per_record", "key_phrases_per_record",
                            "visual_objects_per_record", "noise_items_per_record",
                            "label_signal"},
                           "synthetic config");
    SyntheticSpec cfg;
    if (j.contains("seed")) detail::read_field(j, "seed", cfg.seed, "synthetic config");
    if (j.contains("num_classes")) detail::read_field(j, "num_classes", cfg.num_classes, "synthetic config");
    if (j.contains("records_per_class")) detail::read_field(j, "records_per_class", cfg.records_per_class, "synthetic config");
    if (j.contains("d_t")) detail::read_field(j, "d_t", cfg.d_t, "synthetic config");
    if (j.contains("d_v")) detail::read_field(j, "d_v", cfg.d_v, "synthetic config");
    if (j.contains("text_entities_per_record")) detail::read_field(j, "text_entities_per_record", cfg.text_entities_per_record, "synthetic config");
    if (j.contains("key_phrases_per_record")) detail::read_field(j, "key_phrases_per_record", cfg.key_phrases_per_record, "synthetic config");
    if (j.contains("visual_objects_per_record")) detail::read_field(j, "visual_objects_per_record", cfg.visual_objects_per_record, "synthetic config");
    if (j.contains("noise_items_per_record")) detail::read_field(j, "noise_items_per_record", cfg.noise_items_per_record, "synthetic config");
    if (j.contains("label_signal")) {
        std::string signal;
        detail::read_field(j, "label_signal", signal, "synthetic config");
        cfg.label_signal = label_signal_from_string(signal);
    }
    return cfg;
}

json paths_to_json(const RunConfig::Paths& cfg) {
    json j;
    j["train_path"] = cfg.train_path;
    j["val_path"] = cfg.val_path;
    j["test_path"] = cfg.test_path;
    j["checkpoint"] = cfg.checkpoint;
    return j;
}

RunConfig::Paths paths_from_json(const json& j) {
    detail::reject_unknown(j, {"train_path", "val_path", "test_path", "checkpoint"},
                           "paths config");
    RunConfig::Paths cfg;
    if (j.contains("train_path")) detail::read_field(j, "train_path", cfg.train_path, "paths config");
    if (j.contains("val_path")) detail::read_field(j, "val_path", cfg.val_path, "paths config");
    if (j.contains("test_path")) detail::read_field(j, "test_path", cfg.test_path, "paths config");
    if (j.contains("checkpoint")) detail::read_field(j, "checkpoint", cfg.checkpoint, "paths config");
    return cfg;
}

/// Applies one KEY=VALUE override to the document; the value is parsed as
/// JSON when possible, otherwise taken as a string.
void apply_override(json& doc, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValidationError("--set expects KEY=VALUE, got '" + spec + "'");
    }
    const std::string key = spec.substr(0, eq);
    const std::string raw = spec.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &doc;
    std::size_t pos = 0;
    while (true) {
        const std::size_t dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (part.empty()) {
            throw ValidationError("--set key '" + key + "' has an empty path segment");
        }
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            break;
        }
        node = &(*node)[part];
        if (!node->is_object() && !node->is_null()) {
            throw ValidationError("--set key '" + key + "' descends into a non-object");
        }
        pos = dot + 1;
    }
}

} // namespace

RunConfig parse_run_config(const std::string& json_text,
                           const std::vector<std::string>& overrides) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("config: expected a JSON object");
    for (const auto& o : overrides) apply_override(doc, o);

    detail::reject_unknown(doc, {"model", "train", "ingest", "synthetic", "paths"}, "config");
    RunConfig cfg;
    if (doc.contains("model")) {
        cfg.model = detail::model_config_from_json(doc["model"], "model config");
    }
    if (doc.contains("train")) cfg.train = train_config_from_json(doc["train"]);
    if (doc.contains("ingest")) cfg.ingest = ingest_from_json(doc["ingest"]);
    if (doc.contains("synthetic")) cfg.synthetic = synthetic_from_json(doc["synthetic"]);
    if (doc.contains("paths")) cfg.paths = paths_from_json(doc["paths"]);
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), overrides);
}

std::string serialize_run_config(const RunConfig& cfg) {
    json doc;
    doc["model"] = detail::model_config_to_json(cfg.model);
    doc["train"] = train_config_to_json(cfg.train);
    doc["ingest"] = ingest_to_json(cfg.ingest);
    doc["synthetic"] = synthetic_to_json(cfg.synthetic);
    doc["paths"] = paths_to_json(cfg.paths);
    return doc.dump(2) + "\n";
}

std::string run_config_hash(const RunConfig& cfg) {
    const std::string canonical = serialize_run_config(cfg);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

} // namespace kgfuse
