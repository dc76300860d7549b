#include "kgfuse/metrics.hpp"

#include <json.hpp>

#include "kgfuse/errors.hpp"

namespace kgfuse {

MetricsReport metrics_from_confusion(const std::vector<std::vector<std::int64_t>>& confusion) {
    const std::size_t c = confusion.size();
    if (c == 0) throw ValidationError("metrics: empty confusion matrix");
    for (const auto& row : confusion) {
        if (row.size() != c) throw ValidationError("metrics: confusion matrix must be square");
    }

    MetricsReport report;
    report.confusion = confusion;
    std::int64_t total = 0, correct = 0;
    report.support.resize(c, 0);
    std::vector<std::int64_t> predicted(c, 0);
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            total += confusion[i][j];
            report.support[i] += confusion[i][j];
            predicted[j] += confusion[i][j];
        }
        correct += confusion[i][i];
    }
    if (total == 0) throw ValidationError("metrics: confusion matrix has no entries");
    report.accuracy = static_cast<double>(correct) / static_cast<double>(total);

    report.per_class_f1.resize(c, 0.0);
    double weighted = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        const double tp = static_cast<double>(confusion[i][i]);
        const double precision_den = static_cast<double>(predicted[i]);
        const double recall_den = static_cast<double>(report.support[i]);
        // F1 = 2PR / (P + R), with 0/0 defined as 0
        double f1 = 0.0;
        if (precision_den > 0.0 && recall_den > 0.0) {
            const double p = tp / precision_den;
            const double r = tp / recall_den;
            f1 = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        }
        report.per_class_f1[i] = f1;
        weighted += static_cast<double>(report.support[i]) * f1;
    }
    report.weighted_f1 = weighted / static_cast<double>(total);
    return report;
}

MetricsReport compute_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                              int num_classes) {
    if (y_true.size() != y_pred.size()) {
        throw ValidationError("metrics: prediction count does not match label count");
    }
    if (y_true.empty()) throw ValidationError("metrics: no records to evaluate");
    std::vector<std::vector<std::int64_t>> confusion(
        static_cast<std::size_t>(num_classes),
        std::vector<std::int64_t>(static_cast<std::size_t>(num_classes), 0));
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] < 0 || y_true[i] >= num_classes || y_pred[i] < 0 ||
            y_pred[i] >= num_classes) {
            throw ValidationError("metrics: class index out of range");
        }
        ++confusion[static_cast<std::size_t>(y_true[i])][static_cast<std::size_t>(y_pred[i])];
    }
    return metrics_from_confusion(confusion);
}

std::string metrics_to_json(const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["accuracy"] = report.accuracy;
    j["per_class_f1"] = report.per_class_f1;
    j["weighted_f1"] = report.weighted_f1;
    j["confusion"] = report.confusion;
    j["support"] = report.support;
    return j.dump();
}

} // namespace kgfuse
