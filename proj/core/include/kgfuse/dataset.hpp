#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kgfuse/errors.hpp"

namespace kgfuse {

enum class KnowledgeSource { TextEntity, KeyPhrase, VisualObject };

std::string to_string(KnowledgeSource s);
KnowledgeSource knowledge_source_from_string(const std::string& s);

/// One extracted knowledge item: a precomputed embedding plus the extractor's
/// confidence and a symbolic key used for deduplication.
struct KnowledgeItem {
    std::vector<double> embedding;
    double score = 0.0;
    std::string dedup_key;
    KnowledgeSource source = KnowledgeSource::TextEntity;
};

/// One claim-evidence pair with precomputed global embeddings and the three
/// knowledge-item lists. label is absent for unlabeled inference records.
struct KnowledgeRecord {
    std::string id;
    std::vector<double> claim_text_emb;
    std::vector<double> claim_image_emb;
    std::vector<double> evidence_text_emb;
    std::vector<double> evidence_image_emb;
    std::vector<KnowledgeItem> text_entities;
    std::vector<KnowledgeItem> key_phrases;
    std::vector<KnowledgeItem> visual_objects;
    std::optional<int> label;
};

struct Dataset {
    std::vector<KnowledgeRecord> records;
    int num_classes = 0;
    int d_t = 0;
    int d_v = 0;
    std::vector<std::string> class_names;
};

/// Parses a JSON Lines dataset (header line then one record per line) and
/// validates every invariant; errors carry the offending line number.
Dataset load_dataset(const std::filesystem::path& path);

/// Parses dataset content from a string (same format as load_dataset).
Dataset parse_dataset(const std::string& content);

std::string serialize_dataset(const Dataset& ds);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

struct FilterOptions {
    double text_threshold = 0.3;
    double visual_threshold = 0.8;
    int max_per_source = 16;
};

/// Drops items below their modality's confidence threshold, keeps the first
/// occurrence per dedup_key within each source list (stable order) and
/// truncates each list to max_per_source. Globals and label are untouched.
KnowledgeRecord filter_and_dedup(const KnowledgeRecord& record, double text_threshold,
                                 double visual_threshold, int max_per_source);

Dataset filter_dataset(const Dataset& ds, const FilterOptions& opts);

} // namespace kgfuse
