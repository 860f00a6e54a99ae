#include "hoi/loss.hpp"

#include <cmath>

namespace hoi {

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "cb_focal") return LossKind::kCbFocal;
    if (s == "bce") return LossKind::kBce;
    if (s == "focal") return LossKind::kFocal;
    if (s == "mlm") return LossKind::kMlm;
    throw SchemaError("unknown loss kind '" + s + "'");
}

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::kCbFocal: return "cb_focal";
        case LossKind::kBce: return "bce";
        case LossKind::kFocal: return "focal";
        case LossKind::kMlm: return "mlm";
    }
    return "?";
}

std::vector<double> cb_class_weights(const std::vector<int64_t>& counts, double beta) {
    if (beta < 0.0 || beta >= 1.0) throw SchemaError("beta must be in [0,1)");
    std::vector<double> weights(counts.size());
    for (size_t i = 0; i < counts.size(); ++i) {
        const int64_t n = counts[i];
        if (n < 0) throw SchemaError("negative class count");
        weights[i] = n == 0 ? (1.0 - beta) : (1.0 - beta) / (1.0 - std::pow(beta, static_cast<double>(n)));
    }
    return weights;
}

Var weighted_focal_loss(const Var& probs, const std::vector<uint8_t>& target,
                        const std::vector<double>& class_weights, double gamma) {
    const int n = probs->value.cols();
    if (probs->value.rows() != 1 || static_cast<int>(target.size()) != n ||
        static_cast<int>(class_weights.size()) != n)
        throw ShapeError("loss inputs must agree on the class count");
    if (gamma < 0.0) throw SchemaError("gamma must be >= 0");

    // p_y = y*p + (1-y)*(1-p), built as (2y-1) ⊙ p + (1-y).
    Tensor sign({1, n}), offset({1, n}), weights({1, n});
    for (int i = 0; i < n; ++i) {
        sign.at(0, i) = target[static_cast<size_t>(i)] ? 1.0 : -1.0;
        offset.at(0, i) = target[static_cast<size_t>(i)] ? 0.0 : 1.0;
        weights.at(0, i) = class_weights[static_cast<size_t>(i)];
    }
    const Var p_y = clamp(add(mul(probs, constant(sign)), constant(offset)), 1e-7, 1.0 - 1e-7);
    Var per_class = mul(pow_of(sub(constant(Tensor({1, n}, 1.0)), p_y), gamma), log_of(p_y));
    per_class = mul(per_class, constant(weights));
    return scale(mean_all(per_class), -1.0);
}

Var cb_focal_loss(const Var& probs, const std::vector<uint8_t>& target,
                  const std::vector<int64_t>& counts, double beta, double gamma) {
    return weighted_focal_loss(probs, target, cb_class_weights(counts, beta), gamma);
}

Var mlm_loss(const Var& scores, const std::vector<uint8_t>& target) {
    const int n = scores->value.cols();
    if (scores->value.rows() != 1 || static_cast<int>(target.size()) != n)
        throw ShapeError("scores and target must agree on the class count");
    std::vector<int> positives, negatives;
    for (int i = 0; i < n; ++i)
        (target[static_cast<size_t>(i)] ? positives : negatives).push_back(i);
    if (positives.empty()) throw NoPositiveLabel("multi-label margin needs a positive class");
    if (negatives.empty()) return constant(Tensor({1, 1}, 0.0));

    const int np = static_cast<int>(positives.size());
    const int nn = static_cast<int>(negatives.size());
    // margins[i][j] = 1 - s_pos_i + s_neg_j
    const Var pos_col = transpose(gather_cols(scores, positives));            // np x 1
    const Var neg_row = gather_cols(scores, negatives);                       // 1 x nn
    const Var pos_grid = matmul(pos_col, constant(Tensor({1, nn}, 1.0)));     // np x nn
    const Var neg_grid = matmul(constant(Tensor({np, 1}, 1.0)), neg_row);     // np x nn
    const Var margins = add(sub(constant(Tensor({np, nn}, 1.0)), pos_grid), neg_grid);
    return mean_all(clamp(margins, 0.0, 1e30));
}

Var compute_loss(const LossConfig& config, const Var& probs, const Var& logits,
                 const std::vector<uint8_t>& target, const std::vector<int64_t>& counts) {
    switch (config.kind) {
        case LossKind::kCbFocal:
            return cb_focal_loss(probs, target, counts, config.beta, config.gamma);
        case LossKind::kBce: {
            const std::vector<double> ones(target.size(), 1.0);
            return weighted_focal_loss(probs, target, ones, 0.0);
        }
        case LossKind::kFocal: {
            const std::vector<double> ones(target.size(), 1.0);
            return weighted_focal_loss(probs, target, ones, config.gamma);
        }
        case LossKind::kMlm:
            return mlm_loss(logits, target);
    }
    throw SchemaError("unknown loss kind");
}

}  // namespace hoi
