#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hoi/loss.hpp"
#include "hoi/optim.hpp"
#include "hoi/pipeline.hpp"

namespace hoi {

struct TrainOptions {
    int epochs = 25;
    int batch_size = 2;  // videos per batch
    uint64_t seed = 7;
    WindowConfig window;
    bool flip = true;
    // cross_video: every batch draws windows from distinct videos (each video
    // once per epoch). per_video: one video's windows per batch.
    std::string window_sampling = "cross_video";
    LossConfig loss;
    AdamWConfig adamw;
    ScheduleConfig schedule;
    EvalOptions eval;
    int eval_every = 1;       // epochs between validation passes; 0 disables
    std::string out_dir;      // when set: training_log.jsonl + checkpoints
    int checkpoint_every = 0; // extra per-epoch checkpoint copies
    bool quiet = true;
};

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    double lr = 0.0;
    std::optional<MetricsReport> val;
};

struct TrainResult {
    std::vector<EpochLog> epochs;
    int64_t steps = 0;
};

// Deterministic given (options.seed, config, data). Per-class counts for the
// class-balanced loss are computed once from the training split. NaN/Inf in a
// forward pass, gradient, or update aborts with NonFiniteError naming the
// step.
TrainResult train(HoiModel& model, const Dataset& train_data, const Dataset* val_data,
                  const FeatureProvider& provider, const TrainOptions& options);

}  // namespace hoi
