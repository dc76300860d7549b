#include "kgfuse/commands.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "kgfuse/checkpoint.hpp"
#include "kgfuse/graph.hpp"
#include "kgfuse/logging.hpp"
#include "kgfuse/rng.hpp"
#include "kgfuse/synthetic.hpp"

namespace kgfuse {

namespace {

std::string fmt_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string fmt_delta(double delta) {
    char buf[48];
    // mirrors the ablation-table convention: "(↓ 0.65)" for a drop
    std::snprintf(buf, sizeof(buf), "(%s %.2f)", delta <= 0.0 ? "↓" : "↑",
                  std::abs(delta));
    return buf;
}

std::filesystem::path resolve(const std::filesystem::path& out_dir, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : out_dir / path;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path.string());
    out << content;
    if (!out) throw IoError("failed writing file: " + path.string());
}

void ensure_out_dir(const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
}

void require_dims_match(const ModelConfig& model, const Dataset& ds, const std::string& what) {
    if (model.d_t != ds.d_t || model.d_v != ds.d_v || model.num_classes != ds.num_classes) {
        throw ValidationError(what + ": model config (d_t=" + std::to_string(model.d_t) +
                              ", d_v=" + std::to_string(model.d_v) +
                              ", num_classes=" + std::to_string(model.num_classes) +
                              ") does not match dataset header (d_t=" + std::to_string(ds.d_t) +
                              ", d_v=" + std::to_string(ds.d_v) +
                              ", num_classes=" + std::to_string(ds.num_classes) + ")");
    }
}

/// Equality over everything inference depends on; the init seed may differ.
void require_compatible(const ModelConfig& ckpt, const ModelConfig& cfg) {
    ModelConfig a = ckpt, b = cfg;
    a.seed = b.seed;
    if (!(a == b)) {
        throw ValidationError("checkpoint config does not match the run config model block "
                              "(compare d_t/d_v/d/num_heads/num_layers/d_hidden/num_classes/"
                              "fusion/use_global_concat/use_knowledge/leaky_slope)");
    }
}

struct LoadedData {
    Dataset train;
    Dataset val;
    Dataset test;
};

LoadedData load_filtered_splits(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    LoadedData data;
    data.train = load_dataset(resolve(out_dir, cfg.paths.train_path));
    data.val = load_dataset(resolve(out_dir, cfg.paths.val_path));
    data.test = load_dataset(resolve(out_dir, cfg.paths.test_path));
    for (Dataset* ds : {&data.train, &data.val, &data.test}) {
        require_dims_match(cfg.model, *ds, "data");
        *ds = filter_dataset(*ds, cfg.ingest);
    }
    return data;
}

} // namespace

std::string dataset_hash(const Dataset& ds) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    auto mix = [&hash](unsigned char c) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    };
    for (const auto& r : ds.records) {
        for (unsigned char c : r.id) mix(c);
        mix('\n');
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

namespace {

// display columns, not bytes: UTF-8 continuation bytes do not count
std::size_t display_width(const std::string& s) {
    std::size_t width = 0;
    for (unsigned char c : s) {
        if ((c & 0xC0) != 0x80) ++width;
    }
    return width;
}

} // namespace

std::string render_table(const ComparisonReport& report) {
    std::vector<std::array<std::string, 3>> cells;
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const auto& row = report.rows[i];
        std::string wf1 = fmt_metric(row.weighted_f1);
        std::string acc = fmt_metric(row.accuracy);
        if (report.baseline_row >= 0 && static_cast<int>(i) != report.baseline_row) {
            const auto& base = report.rows[static_cast<std::size_t>(report.baseline_row)];
            wf1 += " " + fmt_delta(row.weighted_f1 - base.weighted_f1);
            acc += " " + fmt_delta(row.accuracy - base.accuracy);
        }
        cells.push_back({row.name, wf1, acc});
    }
    std::array<std::size_t, 3> width = {std::string("Model").size(), std::string("w-F1").size(),
                                        std::string("Acc").size()};
    for (const auto& row : cells) {
        for (int c = 0; c < 3; ++c) width[c] = std::max(width[c], display_width(row[c]));
    }
    auto pad = [](const std::string& s, std::size_t w) {
        const std::size_t seen = display_width(s);
        return s + std::string(w - std::min(w, seen), ' ');
    };
    std::ostringstream out;
    if (!report.title.empty()) out << report.title << "\n";
    out << pad("Model", width[0]) << " | " << pad("w-F1", width[1]) << " | "
        << pad("Acc", width[2]) << "\n";
    out << std::string(width[0], '-') << "-+-" << std::string(width[1], '-') << "-+-"
        << std::string(width[2], '-') << "\n";
    for (const auto& row : cells) {
        out << pad(row[0], width[0]) << " | " << pad(row[1], width[1]) << " | "
            << pad(row[2], width[2]) << "\n";
    }
    out << "test-set hash: " << report.test_set_hash << "\n";
    return out.str();
}

std::string render_csv(const ComparisonReport& report) {
    std::string out = "model,weighted_f1,accuracy,weighted_f1_delta,accuracy_delta\n";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const auto& row = report.rows[i];
        out += row.name + "," + fmt_metric(row.weighted_f1) + "," + fmt_metric(row.accuracy);
        if (report.baseline_row >= 0 && static_cast<int>(i) != report.baseline_row) {
            const auto& base = report.rows[static_cast<std::size_t>(report.baseline_row)];
            out += "," + fmt_delta(row.weighted_f1 - base.weighted_f1) + "," +
                   fmt_delta(row.accuracy - base.accuracy);
        } else {
            out += ",,";
        }
        out += "\n";
    }
    return out;
}

std::string report_to_json(const ComparisonReport& report) {
    nlohmann::ordered_json j;
    j["title"] = report.title;
    j["test_set_hash"] = report.test_set_hash;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : report.rows) {
        j["rows"].push_back({{"model", row.name},
                             {"weighted_f1", row.weighted_f1},
                             {"accuracy", row.accuracy}});
    }
    if (report.baseline_row >= 0) j["baseline_row"] = report.baseline_row;
    return j.dump();
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

namespace {

KnowledgeRecord random_record(int d_t, int d_v, int num_classes, std::uint64_t seed) {
    Rng rng(seed);
    KnowledgeRecord r;
    r.id = "gradcheck";
    r.claim_text_emb = unit_vector(rng, d_t);
    r.evidence_text_emb = unit_vector(rng, d_t);
    r.claim_image_emb = unit_vector(rng, d_v);
    r.evidence_image_emb = unit_vector(rng, d_v);
    auto add = [&](std::vector<KnowledgeItem>& list, KnowledgeSource source, int dim, int count,
                   const char* prefix) {
        for (int i = 0; i < count; ++i) {
            KnowledgeItem item;
            item.embedding = unit_vector(rng, dim);
            item.score = rng.uniform(0.5, 1.0);
            item.dedup_key = std::string(prefix) + std::to_string(i);
            item.source = source;
            list.push_back(std::move(item));
        }
    };
    add(r.text_entities, KnowledgeSource::TextEntity, d_t, 3, "te");
    add(r.key_phrases, KnowledgeSource::KeyPhrase, d_t, 2, "kp");
    add(r.visual_objects, KnowledgeSource::VisualObject, d_v, 2, "vo");
    r.label = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(num_classes)));
    return r;
}

} // namespace

std::vector<VariantGradCheck> run_gradcheck_all(const ModelConfig& base,
                                                const std::string& corrupt_param) {
    const KnowledgeRecord record = random_record(base.d_t, base.d_v, base.num_classes, base.seed);
    const HeteroGraph graph = build_graph(record);

    std::vector<VariantGradCheck> results;
    for (FusionVariant variant : kAllFusionVariants) {
        ModelConfig cfg = base;
        cfg.fusion = variant;
        ModelParams params = init_params(cfg);
        ParamRefs refs = params.refs();

        ScalarFn forward = [&](Tape& tape) {
            return training_loss(tape, graph, params, *record.label);
        };
        std::function<void(const ParamRefs&)> hook;
        if (!corrupt_param.empty()) {
            hook = [&corrupt_param](const ParamRefs& ps) {
                for (Param* p : ps) {
                    if (p->name.find(corrupt_param) == std::string::npos) continue;
                    for (std::int64_t i = 0; i < p->grad.size(); ++i) p->grad.flat(i) *= 1.1;
                }
            };
        }
        GradCheckOptions opts;
        opts.seed = base.seed;
        VariantGradCheck result;
        result.variant = to_string(variant);
        result.report = grad_check(forward, refs, opts, hook);
        results.push_back(std::move(result));
    }
    return results;
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

void cmd_generate(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    const Dataset full = generate_synthetic(cfg.synthetic);
    const DatasetSplit split = split_dataset(full, cfg.synthetic.seed);
    ensure_out_dir(out_dir);
    save_dataset(split.train, resolve(out_dir, cfg.paths.train_path));
    save_dataset(split.val, resolve(out_dir, cfg.paths.val_path));
    save_dataset(split.test, resolve(out_dir, cfg.paths.test_path));
    std::cout << "generated " << full.records.size() << " records (train "
              << split.train.records.size() << " / val " << split.val.records.size() << " / test "
              << split.test.records.size() << ") into " << out_dir.string() << "\n";
}

void cmd_train(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.model.validate();
    LoadedData data = load_filtered_splits(cfg, out_dir);
    ensure_out_dir(out_dir);

    ModelParams params = init_params(cfg.model);
    log_info("training " + to_string(cfg.model.fusion) + " for " +
             std::to_string(cfg.train.epochs) + " epochs on " +
             std::to_string(data.train.records.size()) + " records");
    TrainResult result = train(params, data.train, &data.val, cfg.train);
    const MetricsReport test = evaluate(params, data.test);

    save_checkpoint(params, resolve(out_dir, cfg.paths.checkpoint));
    write_file(out_dir / "trace.csv", trace_to_csv(result.trace));
    write_file(out_dir / "metrics.json", metrics_to_json(test) + "\n");

    if (!result.trace.empty()) {
        std::cout << "final epoch mean loss: " << result.trace.back().mean_loss << "\n";
    }
    std::cout << "test accuracy: " << fmt_metric(test.accuracy)
              << "  weighted F1: " << fmt_metric(test.weighted_f1) << "\n";
}

void cmd_eval(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    ModelParams params = load_checkpoint(resolve(out_dir, cfg.paths.checkpoint));
    require_compatible(params.config(), cfg.model);
    Dataset test = load_dataset(resolve(out_dir, cfg.paths.test_path));
    require_dims_match(params.config(), test, "eval");
    test = filter_dataset(test, cfg.ingest);

    const MetricsReport report = evaluate(params, test);
    const std::string json_text = metrics_to_json(report) + "\n";
    ensure_out_dir(out_dir);
    write_file(out_dir / "metrics.json", json_text);
    std::cout << json_text;
}

namespace {

struct VariantSpec {
    std::string name;
    ModelConfig model;
};

ComparisonReport run_variant_suite(const std::string& title,
                                   const std::vector<VariantSpec>& variants, int baseline_row,
                                   const RunConfig& cfg, const std::filesystem::path& out_dir) {
    LoadedData data = load_filtered_splits(cfg, out_dir);
    ComparisonReport report;
    report.title = title;
    report.baseline_row = baseline_row;
    report.test_set_hash = dataset_hash(data.test);
    for (const auto& variant : variants) {
        require_dims_match(variant.model, data.train, "variant " + variant.name);
        ModelParams params = init_params(variant.model);
        log_info("training variant: " + variant.name);
        train(params, data.train, &data.val, cfg.train);
        const MetricsReport test = evaluate(params, data.test);
        report.rows.push_back({variant.name, test.weighted_f1, test.accuracy});
    }
    return report;
}

void emit_report(const ComparisonReport& report, const std::filesystem::path& out_dir,
                 const std::string& stem) {
    ensure_out_dir(out_dir);
    const std::string table = render_table(report);
    write_file(out_dir / (stem + ".txt"), table);
    write_file(out_dir / (stem + ".csv"), render_csv(report));
    write_file(out_dir / (stem + ".json"), report_to_json(report) + "\n");
    std::cout << table;
}

} // namespace

ComparisonReport cmd_ablate(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    // four configurations from the same seed; the first row is the baseline
    ModelConfig full = cfg.model;
    full.fusion = FusionVariant::KGF;
    full.use_knowledge = true;
    full.use_global_concat = true;

    ModelConfig no_knowledge = full;
    no_knowledge.use_knowledge = false;
    ModelConfig no_graph = full;
    no_graph.fusion = FusionVariant::ConcatFusion;
    ModelConfig no_global = full;
    no_global.use_global_concat = false;

    const std::vector<VariantSpec> variants = {
        {"Full KGF", full},
        {"w/o Multi-Knowledge", no_knowledge},
        {"w/o Graph Fusion", no_graph},
        {"w/o Global", no_global},
    };
    ComparisonReport report = run_variant_suite("Ablation", variants, 0, cfg, out_dir);
    emit_report(report, out_dir, "ablation");
    return report;
}

ComparisonReport cmd_compare(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    std::vector<VariantSpec> variants;
    for (FusionVariant v : kAllFusionVariants) {
        ModelConfig model = cfg.model;
        model.fusion = v;
        variants.push_back({display_name(v), model});
    }
    ComparisonReport report = run_variant_suite("Fusion comparison", variants, -1, cfg, out_dir);
    emit_report(report, out_dir, "comparison");
    return report;
}

bool cmd_gradcheck(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    const char* corrupt_env = std::getenv("KGFUSE_CORRUPT_GRAD"); // test hook
    const std::string corrupt = corrupt_env ? corrupt_env : "";
    const auto results = run_gradcheck_all(cfg.model, corrupt);

    bool all_pass = true;
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : results) {
        all_pass = all_pass && r.report.pass;
        char line[160];
        std::snprintf(line, sizeof(line), "%-16s %s  max rel err %.3e", r.variant.c_str(),
                      r.report.pass ? "PASS" : "FAIL", r.report.max_rel_err);
        std::cout << line << "\n";
        if (!r.report.pass) {
            std::cout << "  worst tensor: " << r.report.worst.param << "[" << r.report.worst.index
                      << "] analytic " << r.report.worst.analytic << " vs numeric "
                      << r.report.worst.numeric << "\n";
        }
        nlohmann::ordered_json entry;
        entry["variant"] = r.variant;
        entry["pass"] = r.report.pass;
        entry["max_rel_err"] = r.report.max_rel_err;
        entry["worst_param"] = r.report.worst.param;
        j.push_back(std::move(entry));
    }
    ensure_out_dir(out_dir);
    write_file(out_dir / "gradcheck.json", j.dump() + "\n");
    std::cout << (all_pass ? "gradcheck: all variants passed" : "gradcheck: FAILURES above")
              << "\n";
    return all_pass;
}

} // namespace kgfuse
