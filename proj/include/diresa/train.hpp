#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "diresa/dataset.hpp"
#include "diresa/errors.hpp"
#include "diresa/losses.hpp"
#include "diresa/models.hpp"

namespace diresa {

/// Training protocol knobs. Variant presets: batch 512 with the last partial
/// batch dropped for DIRESA and CRAE (per-batch covariance statistics keep
/// their intended size), batch 128 kept otherwise.
struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 128;
    double base_lr = 1e-3;
    std::size_t restarts = 10;
    std::uint64_t seed = 0;
    std::size_t lr_halving_period = 10;
    std::size_t fallback_lr_start_epoch = 50;
    double anneal_step = 0.2;
    double anneal_target = 2e-5;
    bool drop_partial_batch = false;
    std::size_t threads = 1;
};

/// Applies the benchmark batch-size / partial-batch preset for a variant.
void apply_variant_defaults(TrainConfig& config, Variant variant);

struct EpochRecord {
    std::size_t epoch = 0;
    double lr = 0.0;
    double anneal_weight = 0.0;
    LossComponents train_loss;
    LossComponents val_loss;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t degenerate_dist_batches = 0;
    std::optional<std::size_t> anneal_stopped_epoch;
    double final_anneal_weight = 0.0;
};

struct TrainResult {
    ModelParams model;
    TrainHistory history;
    double final_val_loss = 0.0; // weighted total on validation, last epoch
    std::uint64_t seed = 0;
};

/// Divergence during training, carrying the partial history.
class TrainDivergence : public DivergenceError {
public:
    TrainDivergence(const std::string& msg, TrainHistory partial)
        : DivergenceError(msg), history(std::move(partial)) {}

    TrainHistory history;
};

/// One forward/loss evaluation over a batch; fills parameter gradients when
/// `grads` is non-null (train mode). A degenerate correlation-distance batch
/// skips the distance term and flags it instead of failing the run.
struct BatchEval {
    LossComponents comps;
    bool dist_degenerate = false;
};

BatchEval eval_batch(ModelParams& model, const Matrix& batch, const Matrix* twin,
                     const LossWeights& weights, Rng* rng, PassMode mode, ModelGrads* grads);

/// Full single-seed training run over the dataset's train split with
/// per-epoch validation, annealing, and the learning-rate schedule.
TrainResult train(const ModelSpec& spec, const Dataset& dataset, const TrainConfig& config);

struct RestartSummary {
    std::uint64_t seed = 0;
    double final_val_loss = 0.0;
    bool diverged = false;
};

struct RestartsResult {
    TrainResult best;
    std::vector<RestartSummary> restarts;
    std::size_t best_index = 0;
};

/// Runs `config.restarts` independent seeded trainings (optionally across a
/// worker pool) and keeps the model with the smallest validation loss.
RestartsResult train_restarts(const ModelSpec& spec, const Dataset& dataset,
                              const TrainConfig& config);

/// Per-epoch history as CSV: epoch, lr, anneal weight, then one column per
/// loss component for the train and validation splits.
void write_history_csv(const TrainHistory& history, const std::string& path);

} // namespace diresa
