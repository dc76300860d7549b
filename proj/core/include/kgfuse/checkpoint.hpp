#pragma once

#include <filesystem>
#include <string>

#include "kgfuse/model.hpp"

namespace kgfuse {

/// Checkpoint format: one JSON object {config, tensors: {name: {shape,
/// values}}}; doubles round-trip exactly.
std::string serialize_checkpoint(const ModelParams& params);
ModelParams parse_checkpoint(const std::string& content);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

} // namespace kgfuse
