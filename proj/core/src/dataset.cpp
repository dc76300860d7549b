#include "kgfuse/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace kgfuse {

using json = nlohmann::ordered_json;

std::string to_string(KnowledgeSource s) {
    switch (s) {
        case KnowledgeSource::TextEntity: return "text_entity";
        case KnowledgeSource::KeyPhrase: return "key_phrase";
        case KnowledgeSource::VisualObject: return "visual_object";
    }
    throw ValidationError("unreachable knowledge source");
}

KnowledgeSource knowledge_source_from_string(const std::string& s) {
    if (s == "text_entity") return KnowledgeSource::TextEntity;
    if (s == "key_phrase") return KnowledgeSource::KeyPhrase;
    if (s == "visual_object") return KnowledgeSource::VisualObject;
    throw ValidationError("unknown source tag '" + s + "'");
}

namespace {

void reject_unknown_keys(const json& obj, const std::vector<std::string>& known, int line) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            throw ParseError(line, "unknown field '" + it.key() + "'");
        }
    }
}

const json& require_field(const json& obj, const char* key, int line) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw ParseError(line, std::string("missing field '") + key + "'");
    }
    return *it;
}

std::vector<double> parse_embedding(const json& arr, const char* field, int expected_dim,
                                    int line) {
    if (!arr.is_array()) {
        throw ParseError(line, std::string(field) + " must be an array of numbers");
    }
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_number()) {
            throw ParseError(line, std::string(field) + " must contain only numbers");
        }
        out.push_back(v.get<double>());
    }
    if (expected_dim >= 0 && static_cast<int>(out.size()) != expected_dim) {
        throw ParseError(line, std::string(field) + " has " + std::to_string(out.size()) +
                                   " values, expected " + std::to_string(expected_dim));
    }
    return out;
}

KnowledgeItem parse_item(const json& obj, KnowledgeSource expected_source, int dim, int line) {
    if (!obj.is_object()) throw ParseError(line, "knowledge item must be an object");
    reject_unknown_keys(obj, {"embedding", "score", "dedup_key", "source"}, line);
    KnowledgeItem item;
    item.embedding = parse_embedding(require_field(obj, "embedding", line), "item embedding",
                                     dim, line);
    const json& score = require_field(obj, "score", line);
    if (!score.is_number()) throw ParseError(line, "item score must be a number");
    item.score = score.get<double>();
    if (item.score < 0.0 || item.score > 1.0) {
        throw ParseError(line, "item score " + std::to_string(item.score) + " outside [0, 1]");
    }
    const json& key = require_field(obj, "dedup_key", line);
    if (!key.is_string()) throw ParseError(line, "item dedup_key must be a string");
    item.dedup_key = key.get<std::string>();
    const json& source = require_field(obj, "source", line);
    if (!source.is_string()) throw ParseError(line, "item source must be a string");
    try {
        item.source = knowledge_source_from_string(source.get<std::string>());
    } catch (const ValidationError& e) {
        throw ParseError(line, e.what());
    }
    if (item.source != expected_source) {
        throw ParseError(line, "item with source '" + to_string(item.source) +
                                   "' listed under '" + to_string(expected_source) + "'");
    }
    return item;
}

std::vector<KnowledgeItem> parse_items(const json& arr, KnowledgeSource source, int dim,
                                       int line) {
    if (!arr.is_array()) throw ParseError(line, "knowledge list must be an array");
    std::vector<KnowledgeItem> out;
    out.reserve(arr.size());
    for (const auto& obj : arr) out.push_back(parse_item(obj, source, dim, line));
    return out;
}

json item_to_json(const KnowledgeItem& item) {
    json j;
    j["embedding"] = item.embedding;
    j["score"] = item.score;
    j["dedup_key"] = item.dedup_key;
    j["source"] = to_string(item.source);
    return j;
}

json record_to_json(const KnowledgeRecord& r) {
    json j;
    j["id"] = r.id;
    j["claim_text_emb"] = r.claim_text_emb;
    j["claim_image_emb"] = r.claim_image_emb;
    j["evidence_text_emb"] = r.evidence_text_emb;
    j["evidence_image_emb"] = r.evidence_image_emb;
    j["text_entities"] = json::array();
    for (const auto& item : r.text_entities) j["text_entities"].push_back(item_to_json(item));
    j["key_phrases"] = json::array();
    for (const auto& item : r.key_phrases) j["key_phrases"].push_back(item_to_json(item));
    j["visual_objects"] = json::array();
    for (const auto& item : r.visual_objects) j["visual_objects"].push_back(item_to_json(item));
    if (r.label) j["label"] = *r.label;
    return j;
}

} // namespace

Dataset parse_dataset(const std::string& content) {
    std::istringstream in(content);
    std::string line;
    int line_no = 0;

    Dataset ds;
    if (!std::getline(in, line)) {
        throw ParseError(1, "empty dataset: missing header line");
    }
    ++line_no;
    json header;
    try {
        header = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!header.is_object()) throw ParseError(line_no, "header must be a JSON object");
    reject_unknown_keys(header, {"num_classes", "d_t", "d_v", "class_names"}, line_no);
    const json& nc = require_field(header, "num_classes", line_no);
    const json& dt = require_field(header, "d_t", line_no);
    const json& dv = require_field(header, "d_v", line_no);
    const json& names = require_field(header, "class_names", line_no);
    if (!nc.is_number_integer() || !dt.is_number_integer() || !dv.is_number_integer()) {
        throw ParseError(line_no, "num_classes, d_t and d_v must be integers");
    }
    ds.num_classes = nc.get<int>();
    ds.d_t = dt.get<int>();
    ds.d_v = dv.get<int>();
    if (ds.num_classes < 2) {
        throw ParseError(line_no, "num_classes must be at least 2");
    }
    if (ds.d_t < 1 || ds.d_v < 1) {
        throw ParseError(line_no, "d_t and d_v must be positive");
    }
    if (!names.is_array()) throw ParseError(line_no, "class_names must be an array");
    for (const auto& n : names) {
        if (!n.is_string()) throw ParseError(line_no, "class_names must contain strings");
        ds.class_names.push_back(n.get<std::string>());
    }
    if (static_cast<int>(ds.class_names.size()) != ds.num_classes) {
        throw ParseError(line_no, "class_names length " + std::to_string(ds.class_names.size()) +
                                      " does not match num_classes " +
                                      std::to_string(ds.num_classes));
    }

    std::unordered_set<std::string> seen_ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) throw ParseError(line_no, "record must be a JSON object");
        reject_unknown_keys(obj,
                            {"id", "claim_text_emb", "claim_image_emb", "evidence_text_emb",
                             "evidence_image_emb", "text_entities", "key_phrases",
                             "visual_objects", "label"},
                            line_no);
        KnowledgeRecord r;
        const json& id = require_field(obj, "id", line_no);
        if (!id.is_string()) throw ParseError(line_no, "id must be a string");
        r.id = id.get<std::string>();
        r.claim_text_emb = parse_embedding(require_field(obj, "claim_text_emb", line_no),
                                           "claim_text_emb", ds.d_t, line_no);
        r.claim_image_emb = parse_embedding(require_field(obj, "claim_image_emb", line_no),
                                            "claim_image_emb", ds.d_v, line_no);
        r.evidence_text_emb = parse_embedding(require_field(obj, "evidence_text_emb", line_no),
                                              "evidence_text_emb", ds.d_t, line_no);
        r.evidence_image_emb = parse_embedding(require_field(obj, "evidence_image_emb", line_no),
                                               "evidence_image_emb", ds.d_v, line_no);
        r.text_entities = parse_items(require_field(obj, "text_entities", line_no),
                                      KnowledgeSource::TextEntity, ds.d_t, line_no);
        r.key_phrases = parse_items(require_field(obj, "key_phrases", line_no),
                                    KnowledgeSource::KeyPhrase, ds.d_t, line_no);
        r.visual_objects = parse_items(require_field(obj, "visual_objects", line_no),
                                       KnowledgeSource::VisualObject, ds.d_v, line_no);
        if (auto it = obj.find("label"); it != obj.end()) {
            if (!it->is_number_integer()) throw ParseError(line_no, "label must be an integer");
            int label = it->get<int>();
            if (label < 0 || label >= ds.num_classes) {
                throw ValidationError("line " + std::to_string(line_no) + ": label " +
                                      std::to_string(label) + " outside [0, " +
                                      std::to_string(ds.num_classes) + ")");
            }
            r.label = label;
        }
        if (!seen_ids.insert(r.id).second) {
            throw ValidationError("line " + std::to_string(line_no) + ": duplicate record id '" +
                                  r.id + "'");
        }
        ds.records.push_back(std::move(r));
    }
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open dataset file: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str());
}

std::string serialize_dataset(const Dataset& ds) {
    json header;
    header["num_classes"] = ds.num_classes;
    header["d_t"] = ds.d_t;
    header["d_v"] = ds.d_v;
    header["class_names"] = ds.class_names;
    std::string out = header.dump();
    out.push_back('\n');
    for (const auto& r : ds.records) {
        out += record_to_json(r).dump();
        out.push_back('\n');
    }
    return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write dataset file: " + path.string());
    }
    out << serialize_dataset(ds);
    if (!out) {
        throw IoError("failed writing dataset file: " + path.string());
    }
}

namespace {

std::vector<KnowledgeItem> filter_list(const std::vector<KnowledgeItem>& items, double threshold,
                                       int max_per_source) {
    std::vector<KnowledgeItem> out;
    std::unordered_set<std::string> seen;
    for (const auto& item : items) {
        if (static_cast<int>(out.size()) >= max_per_source) break;
        if (item.score < threshold) continue;
        if (!seen.insert(item.dedup_key).second) continue;
        out.push_back(item);
    }
    return out;
}

} // namespace

KnowledgeRecord filter_and_dedup(const KnowledgeRecord& record, double text_threshold,
                                 double visual_threshold, int max_per_source) {
    if (text_threshold < 0.0 || text_threshold > 1.0 || visual_threshold < 0.0 ||
        visual_threshold > 1.0) {
        throw ValidationError("thresholds must lie in [0, 1]");
    }
    if (max_per_source < 0) {
        throw ValidationError("max_per_source must be non-negative");
    }
    KnowledgeRecord out = record;
    out.text_entities = filter_list(record.text_entities, text_threshold, max_per_source);
    // keyphrases are textual knowledge and filter under the textual threshold
    out.key_phrases = filter_list(record.key_phrases, text_threshold, max_per_source);
    out.visual_objects = filter_list(record.visual_objects, visual_threshold, max_per_source);
    return out;
}

Dataset filter_dataset(const Dataset& ds, const FilterOptions& opts) {
    Dataset out = ds;
    for (auto& r : out.records) {
        r = filter_and_dedup(r, opts.text_threshold, opts.visual_threshold, opts.max_per_source);
    }
    return out;
}

} // namespace kgfuse
