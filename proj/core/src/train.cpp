#include "kgfuse/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "kgfuse/graph.hpp"
#include "kgfuse/rng.hpp"

namespace kgfuse {

void TrainConfig::validate() const {
    // 0 is allowed: an lr=0 run is a deterministic no-op useful for smoke tests
    if (!(learning_rate >= 0.0)) throw ValidationError("train: learning_rate must be non-negative");
    if (batch_size < 1) throw ValidationError("train: batch_size must be at least 1");
    if (epochs < 0) throw ValidationError("train: epochs must be non-negative");
    if (early_stop_patience < 0) {
        throw ValidationError("train: early_stop_patience must be non-negative");
    }
}

namespace {

void require_labels(const Dataset& ds, const char* what) {
    if (ds.records.empty()) {
        throw ValidationError(std::string(what) + ": dataset is empty");
    }
    for (const auto& r : ds.records) {
        if (!r.label) {
            throw ValidationError(std::string(what) + ": record '" + r.id + "' has no label");
        }
    }
}

} // namespace

TrainResult train(ModelParams& params, const Dataset& train_set, const Dataset* val_set,
                  const TrainConfig& cfg) {
    cfg.validate();
    require_labels(train_set, "train");
    if (val_set) require_labels(*val_set, "train (validation)");

    Adam optimizer({.lr = cfg.learning_rate});
    ParamRefs refs = params.refs();
    Rng shuffle_rng(cfg.seed);

    std::vector<std::size_t> order(train_set.records.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    std::optional<ModelParams> best_params;
    double best_metric = -1.0;
    int epochs_since_improvement = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) shuffle(order, shuffle_rng);

        double loss_sum = 0.0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            const std::size_t batch_end = std::min(pos + static_cast<std::size_t>(cfg.batch_size),
                                                   order.size());
            const double inv_batch = 1.0 / static_cast<double>(batch_end - pos);
            zero_grads(refs);
            for (; pos < batch_end; ++pos) {
                const KnowledgeRecord& record = train_set.records[order[pos]];
                const HeteroGraph graph = build_graph(record);
                Tape tape;
                Tape::Var loss = training_loss(tape, graph, params, *record.label);
                const double loss_value = tape.scalar(loss);
                if (!std::isfinite(loss_value)) {
                    throw NumericError("train: non-finite loss at epoch " +
                                       std::to_string(epoch) + ", record '" + record.id + "'");
                }
                loss_sum += loss_value;
                tape.backward(loss, inv_batch); // gradient accumulation = mean batch loss
            }
            optimizer.step(refs);
        }

        EpochTrace trace;
        trace.epoch = epoch;
        trace.mean_loss = loss_sum / static_cast<double>(order.size());
        if (val_set) {
            MetricsReport val = evaluate(params, *val_set);
            trace.val_accuracy = val.accuracy;
            trace.val_weighted_f1 = val.weighted_f1;

            if (cfg.early_stop_patience > 0) {
                if (val.weighted_f1 > best_metric) {
                    best_metric = val.weighted_f1;
                    best_params = params;
                    result.best_epoch = epoch;
                    epochs_since_improvement = 0;
                } else {
                    ++epochs_since_improvement;
                }
            }
        }
        result.trace.push_back(trace);
        if (cfg.early_stop_patience > 0 && val_set &&
            epochs_since_improvement >= cfg.early_stop_patience) {
            break;
        }
    }

    if (best_params) {
        params.copy_values_from(*best_params);
    } else {
        result.best_epoch = cfg.epochs > 0 ? static_cast<int>(result.trace.size()) - 1 : -1;
    }
    return result;
}

MetricsReport evaluate(const ModelParams& params, const Dataset& dataset) {
    require_labels(dataset, "evaluate");
    std::vector<int> y_true, y_pred;
    y_true.reserve(dataset.records.size());
    y_pred.reserve(dataset.records.size());
    for (const auto& record : dataset.records) {
        const HeteroGraph graph = build_graph(record);
        const Prediction pred = predict(graph, params);
        y_true.push_back(*record.label);
        y_pred.push_back(pred.label);
    }
    return compute_metrics(y_true, y_pred, params.config().num_classes);
}

std::string trace_to_csv(const std::vector<EpochTrace>& trace) {
    std::string out = "epoch,mean_loss,val_accuracy,val_weighted_f1\n";
    char buf[64];
    for (const auto& row : trace) {
        out += std::to_string(row.epoch);
        std::snprintf(buf, sizeof(buf), ",%.17g", row.mean_loss);
        out += buf;
        if (row.val_accuracy) {
            std::snprintf(buf, sizeof(buf), ",%.17g", *row.val_accuracy);
            out += buf;
        } else {
            out += ",";
        }
        if (row.val_weighted_f1) {
            std::snprintf(buf, sizeof(buf), ",%.17g", *row.val_weighted_f1);
            out += buf;
        } else {
            out += ",";
        }
        out += "\n";
    }
    return out;
}

} // namespace kgfuse
