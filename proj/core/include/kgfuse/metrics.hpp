#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kgfuse {

struct MetricsReport {
    double accuracy = 0.0;
    std::vector<double> per_class_f1;
    double weighted_f1 = 0.0;
    std::vector<std::vector<std::int64_t>> confusion; // [true][predicted]
    std::vector<std::int64_t> support;                // per-class true counts
};

/// Accuracy, per-class F1 (0/0 defined as 0) and support-weighted F1 from a
/// [true][predicted] count matrix.
MetricsReport metrics_from_confusion(const std::vector<std::vector<std::int64_t>>& confusion);

MetricsReport compute_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                              int num_classes);

std::string metrics_to_json(const MetricsReport& report);

} // namespace kgfuse
