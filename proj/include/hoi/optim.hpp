#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hoi/autodiff.hpp"

namespace hoi {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-2;
};

// AdamW with decoupled weight decay: the decay shrink is applied separately
// from the adaptive gradient step. Gradients are consumed (cleared) by step().
class AdamW {
public:
    explicit AdamW(AdamWConfig config = {}) : config_(config) {}

    void step(const std::vector<std::pair<std::string, Var>>& params, double lr);
    int64_t step_count() const { return step_count_; }
    const AdamWConfig& config() const { return config_; }

private:
    AdamWConfig config_;
    int64_t step_count_ = 0;
    std::vector<Tensor> first_moment_;
    std::vector<Tensor> second_moment_;
};

struct ScheduleConfig {
    double lr_init = 1e-8;
    double lr_peak = 1e-4;
    double decay_factor = 0.1;
    int warmup_epochs = 3;
    int total_epochs = 25;
};

// Step-wise linear warmup from lr_init to lr_peak over the warmup epochs,
// then per-epoch geometric decay that completes one decay_factor over the
// remaining epochs (reaching lr_peak * decay_factor at epoch == total).
double lr_schedule(const ScheduleConfig& config, int epoch, int steps_per_epoch, int step);

}  // namespace hoi
