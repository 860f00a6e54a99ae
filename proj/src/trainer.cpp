#include "hoi/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hoi/checkpoint.hpp"
#include "json.hpp"

namespace hoi {

namespace {

constexpr uint64_t kFlipStream = 0x464c4950ULL;  // "FLIP"
constexpr uint64_t kDropStream = 0x44524f50ULL;  // "DROP"

std::string epoch_log_json(const EpochLog& log) {
    nlohmann::json j{{"epoch", log.epoch}, {"mean_loss", log.mean_loss}, {"lr", log.lr}};
    if (log.val)
        j["val"] = nlohmann::json::parse(report_to_json(*log.val));
    else
        j["val"] = nullptr;
    return j.dump();
}

}  // namespace

TrainResult train(HoiModel& model, const Dataset& train_data, const Dataset* val_data,
                  const FeatureProvider& provider, const TrainOptions& options) {
    if (options.epochs < 1) throw SchemaError("epochs must be >= 1");
    if (options.window_sampling != "cross_video" && options.window_sampling != "per_video")
        throw SchemaError("window_sampling must be cross_video|per_video");

    // Class counts feed the CB-focal weights; computed once over the split.
    const ClassStatistics stats = class_statistics(train_data);
    std::vector<int64_t> counts = stats.predicate_counts;
    if (static_cast<int>(counts.size()) != model.config().num_outputs())
        throw ShapeError("predicate vocabulary does not match the model heads");

    std::vector<std::vector<WindowSample>> per_video;
    int64_t total_windows = 0;
    for (size_t v = 0; v < train_data.videos.size(); ++v) {
        per_video.push_back(build_windows(train_data, static_cast<int>(v), options.window));
        total_windows += static_cast<int64_t>(per_video.back().size());
    }
    if (total_windows == 0) throw IntegrityError("no training windows for this configuration");

    int steps_per_epoch = 0;
    {
        const auto probe = sample_epoch(train_data, per_video,
                                        options.window_sampling == "per_video" ? 1
                                                                               : options.batch_size,
                                        options.seed);
        steps_per_epoch = static_cast<int>(probe.size());
    }

    std::ofstream log_file;
    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir);
        log_file.open(options.out_dir + "/training_log.jsonl", std::ios::trunc);
        if (!log_file) throw SchemaError("cannot open training log in " + options.out_dir);
    }

    AdamW optimizer(options.adamw);
    TrainResult result;

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        const uint64_t epoch_seed = hash_key(options.seed, static_cast<uint64_t>(epoch));
        auto batches = sample_epoch(train_data, per_video,
                                    options.window_sampling == "per_video" ? 1 : options.batch_size,
                                    epoch_seed);
        Rng flip_rng(hash_key(epoch_seed, kFlipStream));

        double loss_sum = 0.0;
        int64_t loss_count = 0;
        const double epoch_lr = lr_schedule(options.schedule, epoch, steps_per_epoch, 0);

        for (size_t step = 0; step < batches.size(); ++step) {
            std::vector<WindowSample> batch = std::move(batches[step].windows);
            if (options.flip)
                for (auto& sample : batch)
                    if (flip_rng.bernoulli(0.5))
                        sample = horizontal_flip(
                            sample,
                            train_data.videos[static_cast<size_t>(sample.video_index)].width);

            Rng dropout_rng(hash_key(epoch_seed, kDropStream, static_cast<uint64_t>(step)));
            const auto outputs =
                model.forward(train_data, provider, batch, /*training=*/true, &dropout_rng);

            std::vector<Var> sample_losses;
            for (size_t i = 0; i < batch.size(); ++i) {
                if (options.loss.kind == LossKind::kMlm) {
                    // Margin loss is undefined without positives; skip those windows.
                    bool has_positive = false;
                    for (uint8_t y : batch[i].target) has_positive |= (y != 0);
                    if (!has_positive) continue;
                }
                sample_losses.push_back(compute_loss(options.loss, outputs.probs[i],
                                                     outputs.logits[i], batch[i].target, counts));
            }
            if (sample_losses.empty()) continue;

            Var batch_loss = sample_losses.size() == 1
                                 ? sample_losses.front()
                                 : mean_all(stack_rows(sample_losses));
            const double loss_value = batch_loss->value.at(0, 0);
            if (!std::isfinite(loss_value))
                throw NonFiniteError("loss at epoch " + std::to_string(epoch) + " step " +
                                     std::to_string(step));
            backward(batch_loss);

            const double lr =
                lr_schedule(options.schedule, epoch, steps_per_epoch, static_cast<int>(step));
            optimizer.step(model.parameters(), lr);

            loss_sum += loss_value;
            ++loss_count;
            ++result.steps;
        }

        EpochLog log;
        log.epoch = epoch;
        log.mean_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
        log.lr = epoch_lr;
        const bool eval_due =
            val_data != nullptr && options.eval_every > 0 &&
            ((epoch + 1) % options.eval_every == 0 || epoch + 1 == options.epochs);
        if (eval_due) {
            WindowConfig eval_window = options.window;
            eval_window.tau_a = options.eval.tau_a;
            const auto predictions = predict_dataset(model, *val_data, provider, eval_window);
            log.val = evaluate_predictions(*val_data, predictions, options.eval);
        }
        if (log_file) log_file << epoch_log_json(log) << "\n" << std::flush;
        if (!options.quiet)
            std::fprintf(stderr, "epoch %d loss %.6f lr %.3g\n", epoch, log.mean_loss, log.lr);
        result.epochs.push_back(std::move(log));

        if (!options.out_dir.empty() && options.checkpoint_every > 0 &&
            (epoch + 1) % options.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof(name), "/checkpoint_epoch%03d.bin", epoch);
            save_checkpoint(options.out_dir + name, model);
        }
    }

    if (!options.out_dir.empty()) save_checkpoint(options.out_dir + "/checkpoint.bin", model);
    return result;
}

}  // namespace hoi
