#include "kgfuse/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace kgfuse {

using detail::json;

std::string serialize_checkpoint(const ModelParams& params) {
    json j;
    j["config"] = detail::model_config_to_json(params.config());
    json tensors;
    for (const Param* p : params.refs()) {
        json t;
        t["shape"] = p->value.shape();
        t["values"] = std::vector<double>(p->value.values().begin(), p->value.values().end());
        tensors[p->name] = std::move(t);
    }
    j["tensors"] = std::move(tensors);
    return j.dump();
}

ModelParams parse_checkpoint(const std::string& content) {
    json j;
    try {
        j = json::parse(content);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("checkpoint: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("checkpoint: expected a JSON object");
    detail::reject_unknown(j, {"config", "tensors"}, "checkpoint");
    if (!j.contains("config") || !j.contains("tensors")) {
        throw ValidationError("checkpoint: missing config or tensors");
    }
    ModelConfig cfg = detail::model_config_from_json(j["config"], "checkpoint config");
    ModelParams params(cfg);
    const json& tensors = j["tensors"];
    if (!tensors.is_object()) throw ValidationError("checkpoint: tensors must be an object");

    auto refs = params.refs();
    if (tensors.size() != refs.size()) {
        throw ValidationError("checkpoint: expected " + std::to_string(refs.size()) +
                              " tensors, found " + std::to_string(tensors.size()));
    }
    for (Param* p : refs) {
        auto it = tensors.find(p->name);
        if (it == tensors.end()) {
            throw ValidationError("checkpoint: missing tensor '" + p->name + "'");
        }
        Shape shape;
        std::vector<double> values;
        detail::read_field(*it, "shape", shape, "checkpoint tensor");
        detail::read_field(*it, "values", values, "checkpoint tensor");
        if (shape != p->value.shape()) {
            throw ValidationError("checkpoint: tensor '" + p->name + "' has shape " +
                                  shape_str(shape) + ", expected " +
                                  shape_str(p->value.shape()));
        }
        p->value = Tensor(shape, std::move(values));
    }
    return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());
    out << serialize_checkpoint(params);
    if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_checkpoint(buf.str());
}

} // namespace kgfuse
