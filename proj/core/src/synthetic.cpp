#include "kgfuse/synthetic.hpp"

#include <cmath>
#include <numeric>

#include "kgfuse/rng.hpp"

namespace kgfuse {

namespace {

constexpr double kNoiseSigma = 0.3;

std::vector<double> noisy_prototype(const std::vector<double>& proto, Rng& rng) {
    std::vector<double> v(proto.size());
    double norm = 0.0;
    for (std::size_t i = 0; i < proto.size(); ++i) {
        v[i] = proto[i] + kNoiseSigma * rng.normal();
        norm += v[i] * v[i];
    }
    norm = std::sqrt(norm);
    if (norm < 1e-12) return unit_vector(rng, static_cast<int>(proto.size()));
    for (auto& x : v) x /= norm;
    return v;
}

std::string pad_index(int i, int width = 5) {
    std::string s = std::to_string(i);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

} // namespace

std::string to_string(LabelSignal s) {
    return s == LabelSignal::Globals ? "globals" : "knowledge_only";
}

LabelSignal label_signal_from_string(const std::string& s) {
    if (s == "globals") return LabelSignal::Globals;
    if (s == "knowledge_only") return LabelSignal::KnowledgeOnly;
    throw ValidationError("unknown label_signal '" + s + "'");
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.num_classes < 2) throw ValidationError("num_classes must be at least 2");
    if (spec.records_per_class < 1) throw ValidationError("records_per_class must be positive");
    if (spec.d_t < 1 || spec.d_v < 1) throw ValidationError("embedding dimensions must be positive");
    if (spec.text_entities_per_record < 0 || spec.key_phrases_per_record < 0 ||
        spec.visual_objects_per_record < 0 || spec.noise_items_per_record < 0) {
        throw ValidationError("knowledge counts must be non-negative");
    }

    Rng rng(spec.seed);
    Dataset ds;
    ds.num_classes = spec.num_classes;
    ds.d_t = spec.d_t;
    ds.d_v = spec.d_v;
    for (int c = 0; c < spec.num_classes; ++c) ds.class_names.push_back("class_" + std::to_string(c));

    std::vector<std::vector<double>> proto_text, proto_visual;
    for (int c = 0; c < spec.num_classes; ++c) {
        proto_text.push_back(unit_vector(rng, spec.d_t));
        proto_visual.push_back(unit_vector(rng, spec.d_v));
    }

    const int total = spec.num_classes * spec.records_per_class;
    const bool globals_carry_signal = spec.label_signal == LabelSignal::Globals;
    for (int i = 0; i < total; ++i) {
        const int c = i % spec.num_classes;
        KnowledgeRecord r;
        r.id = "rec_" + pad_index(i);
        r.label = c;
        if (globals_carry_signal) {
            r.claim_text_emb = noisy_prototype(proto_text[static_cast<std::size_t>(c)], rng);
            r.evidence_text_emb = noisy_prototype(proto_text[static_cast<std::size_t>(c)], rng);
            r.claim_image_emb = noisy_prototype(proto_visual[static_cast<std::size_t>(c)], rng);
            r.evidence_image_emb = noisy_prototype(proto_visual[static_cast<std::size_t>(c)], rng);
        } else {
            r.claim_text_emb = unit_vector(rng, spec.d_t);
            r.evidence_text_emb = unit_vector(rng, spec.d_t);
            r.claim_image_emb = unit_vector(rng, spec.d_v);
            r.evidence_image_emb = unit_vector(rng, spec.d_v);
        }

        // signal items carry the class prototype; high confidence so they
        // survive the default thresholds (0.3 text / 0.8 visual)
        auto add_signal = [&](std::vector<KnowledgeItem>& list, KnowledgeSource source, int count,
                              const std::vector<double>& proto, const char* prefix) {
            for (int k = 0; k < count; ++k) {
                KnowledgeItem item;
                item.embedding = noisy_prototype(proto, rng);
                item.score = rng.uniform(0.85, 1.0);
                item.dedup_key = std::string(prefix) + "_" + r.id + "_" + std::to_string(k);
                item.source = source;
                list.push_back(std::move(item));
            }
        };
        add_signal(r.text_entities, KnowledgeSource::TextEntity, spec.text_entities_per_record,
                   proto_text[static_cast<std::size_t>(c)], "te");
        add_signal(r.key_phrases, KnowledgeSource::KeyPhrase, spec.key_phrases_per_record,
                   proto_text[static_cast<std::size_t>(c)], "kp");
        add_signal(r.visual_objects, KnowledgeSource::VisualObject,
                   spec.visual_objects_per_record, proto_visual[static_cast<std::size_t>(c)], "vo");

        // class-independent noise items, spread across the three sources
        for (int k = 0; k < spec.noise_items_per_record; ++k) {
            KnowledgeItem item;
            item.score = rng.uniform(0.0, 1.0);
            item.dedup_key = "noise_" + r.id + "_" + std::to_string(k);
            switch (k % 3) {
                case 0:
                    item.source = KnowledgeSource::TextEntity;
                    item.embedding = unit_vector(rng, spec.d_t);
                    r.text_entities.push_back(std::move(item));
                    break;
                case 1:
                    item.source = KnowledgeSource::VisualObject;
                    item.embedding = unit_vector(rng, spec.d_v);
                    r.visual_objects.push_back(std::move(item));
                    break;
                default:
                    item.source = KnowledgeSource::KeyPhrase;
                    item.embedding = unit_vector(rng, spec.d_t);
                    r.key_phrases.push_back(std::move(item));
                    break;
            }
        }
        ds.records.push_back(std::move(r));
    }
    return ds;
}

DatasetSplit split_dataset(const Dataset& ds, std::uint64_t seed) {
    std::vector<std::size_t> order(ds.records.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed ^ 0x51b7157eULL);
    shuffle(order, rng);

    const std::size_t n = order.size();
    const std::size_t n_train = static_cast<std::size_t>(0.8 * static_cast<double>(n));
    const std::size_t n_val = static_cast<std::size_t>(0.1 * static_cast<double>(n));

    DatasetSplit split;
    for (Dataset* part : {&split.train, &split.val, &split.test}) {
        part->num_classes = ds.num_classes;
        part->d_t = ds.d_t;
        part->d_v = ds.d_v;
        part->class_names = ds.class_names;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const KnowledgeRecord& r = ds.records[order[i]];
        if (i < n_train) {
            split.train.records.push_back(r);
        } else if (i < n_train + n_val) {
            split.val.records.push_back(r);
        } else {
            split.test.records.push_back(r);
        }
    }
    return split;
}

} // namespace kgfuse
