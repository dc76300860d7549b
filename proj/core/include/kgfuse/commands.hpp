#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kgfuse/grad_check.hpp"
#include "kgfuse/run_config.hpp"

namespace kgfuse {

/// One table row of a variant comparison (ablation or fusion sweep).
struct ComparisonRow {
    std::string name;
    double weighted_f1 = 0.0;
    double accuracy = 0.0;
};

struct ComparisonReport {
    std::string title;
    std::vector<ComparisonRow> rows;
    int baseline_row = -1;     // deltas rendered against this row when >= 0
    std::string test_set_hash; // record-id hash: every row saw identical test records
};

/// Fixed-width table; deltas formatted like "0.3000 (↓ 0.65)" when a
/// baseline row is set.
std::string render_table(const ComparisonReport& report);
/// CSV with exactly the numbers the table shows.
std::string render_csv(const ComparisonReport& report);
std::string report_to_json(const ComparisonReport& report);

/// FNV-1a over record ids; identifies a dataset split.
std::string dataset_hash(const Dataset& ds);

struct VariantGradCheck {
    std::string variant;
    GradCheckReport report;
};

/// Full-model gradient check per fusion variant on a seeded random record
/// with |T|=3, |K|=2, |O|=2 and the configured dimensions.
std::vector<VariantGradCheck> run_gradcheck_all(const ModelConfig& base,
                                                const std::string& corrupt_param = {});

// ---- CLI commands; they throw (ValidationError/IoError/NumericError) and
// the binary maps exceptions to exit codes ----

void cmd_generate(const RunConfig& cfg, const std::filesystem::path& out_dir);
void cmd_train(const RunConfig& cfg, const std::filesystem::path& out_dir);
void cmd_eval(const RunConfig& cfg, const std::filesystem::path& out_dir);
ComparisonReport cmd_ablate(const RunConfig& cfg, const std::filesystem::path& out_dir);
ComparisonReport cmd_compare(const RunConfig& cfg, const std::filesystem::path& out_dir);
/// Returns true iff every variant passed.
bool cmd_gradcheck(const RunConfig& cfg, const std::filesystem::path& out_dir);

} // namespace kgfuse
