#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kgfuse/dataset.hpp"
#include "kgfuse/model.hpp"
#include "kgfuse/synthetic.hpp"
#include "kgfuse/train.hpp"

namespace kgfuse {

/// Union of everything a command needs, serialized as one JSON document with
/// blocks {model, train, ingest, synthetic, paths}. Every field has a
/// default; unknown keys are rejected; round-trips losslessly.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    FilterOptions ingest;
    SyntheticSpec synthetic;

    struct Paths {
        std::string train_path = "train.jsonl";
        std::string val_path = "val.jsonl";
        std::string test_path = "test.jsonl";
        std::string checkpoint = "checkpoint.json";
    } paths;
};

/// Parses a config document and applies --set KEY=VALUE overrides (dotted
/// paths, e.g. model.d=8) after parsing.
RunConfig parse_run_config(const std::string& json_text,
                           const std::vector<std::string>& overrides = {});

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});

/// Canonical serialization: every field, fixed key order.
std::string serialize_run_config(const RunConfig& cfg);

/// FNV-1a hash of the canonical serialization, as 16 hex digits. Used for
/// timestamp-free run directory names.
std::string run_config_hash(const RunConfig& cfg);

} // namespace kgfuse
