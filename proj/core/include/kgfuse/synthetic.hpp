#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "kgfuse/dataset.hpp"

namespace kgfuse {

enum class LabelSignal { Globals, KnowledgeOnly };

std::string to_string(LabelSignal s);
LabelSignal label_signal_from_string(const std::string& s);

/// Desk-scale stand-in for the FACTIFY/MOCHEG extraction pipeline. Per class
/// a unit-norm prototype is drawn per modality; signal-carrying embeddings
/// are prototype + per-coordinate Gaussian noise (sigma 0.3), renormalized.
/// Under KnowledgeOnly the four global embeddings become class-independent
/// noise and only knowledge items carry the prototype.
struct SyntheticSpec {
    std::uint64_t seed = 7;
    int num_classes = 5;
    int records_per_class = 50;
    int d_t = 16;
    int d_v = 16;
    int text_entities_per_record = 3;
    int key_phrases_per_record = 2;
    int visual_objects_per_record = 2;
    int noise_items_per_record = 2;
    LabelSignal label_signal = LabelSignal::Globals;
};

Dataset generate_synthetic(const SyntheticSpec& spec);

struct DatasetSplit {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Record-level 80/10/10 split after a seeded shuffle.
DatasetSplit split_dataset(const Dataset& ds, std::uint64_t seed);

} // namespace kgfuse
