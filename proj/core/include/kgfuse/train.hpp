#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kgfuse/dataset.hpp"
#include "kgfuse/metrics.hpp"
#include "kgfuse/model.hpp"
#include "kgfuse/optimizer.hpp"

namespace kgfuse {

struct TrainConfig {
    double learning_rate = 2e-5; // paper default; synthetic runs override to 1e-3
    int batch_size = 8;
    int epochs = 50;
    std::uint64_t seed = 1;
    bool shuffle = true;
    int early_stop_patience = 0; // 0 disables early stopping

    void validate() const;
};

struct EpochTrace {
    int epoch = 0;
    double mean_loss = 0.0;
    std::optional<double> val_accuracy;
    std::optional<double> val_weighted_f1;
};

struct TrainResult {
    std::vector<EpochTrace> trace;
    int best_epoch = -1; // set when early stopping restored a snapshot
};

/// Mini-batch cross-entropy training: per epoch a seeded shuffle, batches of
/// batch_size, per record build_graph + forward + cross_entropy, mean batch
/// loss, backward, adam_step. Records must already be filtered. Deterministic
/// given the seeds.
TrainResult train(ModelParams& params, const Dataset& train_set, const Dataset* val_set,
                  const TrainConfig& cfg);

/// Argmax predictions over the dataset; pure (params untouched).
MetricsReport evaluate(const ModelParams& params, const Dataset& dataset);

/// CSV with columns epoch,mean_loss,val_accuracy,val_weighted_f1 (validation
/// cells empty when no validation split was given).
std::string trace_to_csv(const std::vector<EpochTrace>& trace);

} // namespace kgfuse
