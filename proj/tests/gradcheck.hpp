#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hoi/autodiff.hpp"

namespace hoi::testing {

// Central finite-difference check of reverse-mode gradients. `build` must
// construct a fresh scalar loss graph from the current parameter values each
// time it is called. Passes when every coordinate satisfies
//   |analytic - numeric| <= rel_tol * max(|analytic|, |numeric|)  or
//   |analytic - numeric| <= abs_floor.
struct GradCheckResult {
    bool ok = true;
    double worst_rel = 0.0;
    std::string detail;
};

inline GradCheckResult check_gradients(const std::vector<Var>& params,
                                       const std::function<Var()>& build, double h = 1e-5,
                                       double rel_tol = 1e-4, double abs_floor = 1e-7) {
    GradCheckResult result;
    Var loss = build();
    backward(loss);
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) {
        if (p->grad.size() == 0)
            analytic.emplace_back(Tensor(p->value.shape()));
        else
            analytic.push_back(p->grad);
        p->grad = Tensor();
    }

    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& values = params[pi]->value;
        for (int i = 0; i < values.size(); ++i) {
            const double original = values.flat(i);
            values.flat(i) = original + h;
            const double up = build()->value.flat(0);
            values.flat(i) = original - h;
            const double down = build()->value.flat(0);
            values.flat(i) = original;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[pi].flat(i);
            const double diff = std::abs(a - numeric);
            const double denom = std::max(std::abs(a), std::abs(numeric));
            const double rel = denom > 0.0 ? diff / denom : 0.0;
            result.worst_rel = std::max(result.worst_rel, diff <= abs_floor ? 0.0 : rel);
            if (diff > abs_floor && rel > rel_tol) {
                result.ok = false;
                if (result.detail.empty())
                    result.detail = "param " + std::to_string(pi) + " coord " + std::to_string(i) +
                                    ": analytic " + std::to_string(a) + " numeric " +
                                    std::to_string(numeric);
            }
        }
    }
    return result;
}

}  // namespace hoi::testing
