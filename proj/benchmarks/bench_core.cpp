#include <benchmark/benchmark.h>

#include "kgfuse/graph.hpp"
#include "kgfuse/model.hpp"
#include "kgfuse/rng.hpp"
#include "kgfuse/synthetic.hpp"
#include "kgfuse/train.hpp"

namespace {

using namespace kgfuse;

KnowledgeRecord sized_record(int items_per_source, int dim, std::uint64_t seed) {
    Rng rng(seed);
    KnowledgeRecord r;
    r.id = "bench";
    r.claim_text_emb = unit_vector(rng, dim);
    r.evidence_text_emb = unit_vector(rng, dim);
    r.claim_image_emb = unit_vector(rng, dim);
    r.evidence_image_emb = unit_vector(rng, dim);
    auto fill = [&](std::vector<KnowledgeItem>& list, KnowledgeSource src, const char* prefix) {
        for (int i = 0; i < items_per_source; ++i) {
            KnowledgeItem item;
            item.embedding = unit_vector(rng, dim);
            item.score = 0.9;
            item.dedup_key = std::string(prefix) + std::to_string(i);
            item.source = src;
            list.push_back(std::move(item));
        }
    };
    fill(r.text_entities, KnowledgeSource::TextEntity, "t");
    fill(r.key_phrases, KnowledgeSource::KeyPhrase, "k");
    fill(r.visual_objects, KnowledgeSource::VisualObject, "o");
    r.label = 0;
    return r;
}

ModelConfig bench_config() {
    ModelConfig cfg;
    cfg.num_classes = 5;
    cfg.seed = 1;
    return cfg;
}

void BM_BuildGraph(benchmark::State& state) {
    const KnowledgeRecord record = sized_record(static_cast<int>(state.range(0)), 16, 7);
    for (auto _ : state) {
        HeteroGraph g = build_graph(record);
        benchmark::DoNotOptimize(g.edge_weights.data());
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_BuildGraph)->Arg(2)->Arg(8)->Arg(16);

void BM_ForwardKGF(benchmark::State& state) {
    const KnowledgeRecord record = sized_record(static_cast<int>(state.range(0)), 16, 7);
    const HeteroGraph g = build_graph(record);
    const ModelParams params = init_params(bench_config());
    for (auto _ : state) {
        Prediction p = predict(g, params);
        benchmark::DoNotOptimize(p.probs.data());
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ForwardKGF)->Arg(2)->Arg(8)->Arg(16);

void BM_ForwardVariants(benchmark::State& state) {
    const KnowledgeRecord record = sized_record(4, 16, 7);
    const HeteroGraph g = build_graph(record);
    ModelConfig cfg = bench_config();
    cfg.fusion = kAllFusionVariants[static_cast<std::size_t>(state.range(0))];
    const ModelParams params = init_params(cfg);
    state.SetLabel(to_string(cfg.fusion));
    for (auto _ : state) {
        Prediction p = predict(g, params);
        benchmark::DoNotOptimize(p.probs.data());
    }
}
BENCHMARK(BM_ForwardVariants)->DenseRange(0, 4);

void BM_TrainStep(benchmark::State& state) {
    SyntheticSpec spec;
    spec.records_per_class = 2; // one batch of 8 + 2 leftovers
    Dataset ds = generate_synthetic(spec);
    ModelParams params = init_params(bench_config());
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 1;
    for (auto _ : state) {
        train(params, ds, nullptr, cfg);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ds.records.size()));
}
BENCHMARK(BM_TrainStep);

void BM_GenerateSynthetic(benchmark::State& state) {
    SyntheticSpec spec;
    spec.records_per_class = static_cast<int>(state.range(0));
    for (auto _ : state) {
        Dataset ds = generate_synthetic(spec);
        benchmark::DoNotOptimize(ds.records.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 5);
}
BENCHMARK(BM_GenerateSynthetic)->Arg(10)->Arg(50);

} // namespace

BENCHMARK_MAIN();
