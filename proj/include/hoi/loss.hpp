#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hoi/autodiff.hpp"

namespace hoi {

enum class LossKind { kCbFocal, kBce, kFocal, kMlm };

LossKind loss_kind_from_string(const std::string& s);
std::string to_string(LossKind kind);

struct LossConfig {
    LossKind kind = LossKind::kCbFocal;
    double gamma = 0.5;
    double beta = 0.9999;
};

// Class-balanced weight (1-beta)/(1-beta^n). Classes absent from the training
// split (n=0) take the limit weight (1-beta), which keeps them finite and
// low-weight.
std::vector<double> cb_class_weights(const std::vector<int64_t>& counts, double beta);

// Focal term with per-class weights, mean over classes. Probabilities are
// clamped to [1e-7, 1-1e-7] before the log.
Var weighted_focal_loss(const Var& probs, const std::vector<uint8_t>& target,
                        const std::vector<double>& class_weights, double gamma);

// Eq: -(1-beta)/(1-beta^{n_i}) * (1-p_{y_i})^gamma * log(p_{y_i}).
Var cb_focal_loss(const Var& probs, const std::vector<uint8_t>& target,
                  const std::vector<int64_t>& counts, double beta, double gamma);

// Multi-label margin over (positive, negative) class pairs on raw scores:
// mean of max(0, 1 - s_pos + s_neg). Throws NoPositiveLabel when the target
// has no positive class.
Var mlm_loss(const Var& scores, const std::vector<uint8_t>& target);

// Dispatches on the configured kind; `logits` is only consulted for MLM.
Var compute_loss(const LossConfig& config, const Var& probs, const Var& logits,
                 const std::vector<uint8_t>& target, const std::vector<int64_t>& counts);

}  // namespace hoi
