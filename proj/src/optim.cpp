#include "hoi/optim.hpp"

#include <cmath>

namespace hoi {

void AdamW::step(const std::vector<std::pair<std::string, Var>>& params, double lr) {
    if (lr <= 0.0) throw SchemaError("learning rate must be positive");
    if (first_moment_.empty()) {
        for (const auto& [name, p] : params) {
            first_moment_.emplace_back(p->value.shape());
            second_moment_.emplace_back(p->value.shape());
        }
    }
    if (first_moment_.size() != params.size())
        throw ShapeError("optimizer state does not match the parameter list");

    ++step_count_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));

    for (size_t i = 0; i < params.size(); ++i) {
        Var p = params[i].second;
        Tensor& m = first_moment_[i];
        Tensor& v = second_moment_[i];
        if (!m.same_shape(p->value)) throw ShapeError("optimizer moment shape mismatch");
        const bool has_grad = p->grad.size() != 0;

        for (int j = 0; j < p->value.size(); ++j) {
            const double g = has_grad ? p->grad.flat(j) : 0.0;
            if (!std::isfinite(g))
                throw NonFiniteError("gradient of " + params[i].first + " at step " +
                                     std::to_string(step_count_));
            // Decoupled decay first, then the adaptive step.
            double value = p->value.flat(j) * (1.0 - lr * config_.weight_decay);
            m.flat(j) = config_.beta1 * m.flat(j) + (1.0 - config_.beta1) * g;
            v.flat(j) = config_.beta2 * v.flat(j) + (1.0 - config_.beta2) * g * g;
            const double m_hat = m.flat(j) / bc1;
            const double v_hat = v.flat(j) / bc2;
            value -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
            if (!std::isfinite(value))
                throw NonFiniteError("parameter " + params[i].first + " at step " +
                                     std::to_string(step_count_));
            p->value.flat(j) = value;
        }
        p->grad = Tensor();
    }
}

double lr_schedule(const ScheduleConfig& config, int epoch, int steps_per_epoch, int step) {
    if (epoch < 0 || steps_per_epoch < 1 || step < 0) throw SchemaError("invalid schedule query");
    const long global_step = static_cast<long>(epoch) * steps_per_epoch + step;
    const long warmup_steps = static_cast<long>(config.warmup_epochs) * steps_per_epoch;
    if (global_step < warmup_steps) {
        const double frac = static_cast<double>(global_step) / static_cast<double>(warmup_steps);
        return config.lr_init + (config.lr_peak - config.lr_init) * frac;
    }
    const int decay_epochs = config.total_epochs - config.warmup_epochs;
    if (decay_epochs <= 0) return config.lr_peak;
    const double exponent =
        static_cast<double>(epoch - config.warmup_epochs) / static_cast<double>(decay_epochs);
    return config.lr_peak * std::pow(config.decay_factor, exponent);
}

}  // namespace hoi
