// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmssl/optim.hpp"

#include <cmath>
#include <numbers>

namespace mmssl {

void AdamWOptions::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("adamw: lr must be finite and non-negative");
    if (!(weight_decay >= 0.0)) throw ConfigError("adamw: weight_decay must be non-negative");
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("adamw: beta1 must lie in (0, 1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("adamw: beta2 must lie in (0, 1)");
    if (!(eps > 0.0)) throw ConfigError("adamw: eps must be positive");
}

template <typename T>
void adamw_step(BasicParameter<T>& param, const AdamWOptions& options) {
    options.validate();
    if (!param.grad.all_finite()) throw OptimizerError(param.name, "gradient contains NaN or Inf");
    if (param.grad.shape() != param.value.shape()) throw OptimizerError(param.name, "gradient shape mismatch");

    param.step_count += 1;
    const double t = static_cast<double>(param.step_count);
    const double bias1 = 1.0 - std::pow(options.beta1, t);
    const double bias2 = 1.0 - std::pow(options.beta2, t);
    const double decay = 1.0 - options.lr * options.weight_decay;

    auto value = param.value.data();
    auto grad = param.grad.data();
    auto m1 = param.moment1.data();
    auto m2 = param.moment2.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
        const double g = grad[i];
        const double m = options.beta1 * static_cast<double>(m1[i]) + (1.0 - options.beta1) * g;
        const double v = options.beta2 * static_cast<double>(m2[i]) + (1.0 - options.beta2) * g * g;
        m1[i] = static_cast<T>(m);
        m2[i] = static_cast<T>(v);
        const double m_hat = static_cast<double>(m1[i]) / bias1;
        const double v_hat = static_cast<double>(m2[i]) / bias2;
        double theta = static_cast<double>(value[i]);
        if (options.weight_decay != 0.0) theta *= decay;
        theta -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
        value[i] = static_cast<T>(theta);
    }
}

template void adamw_step<float>(BasicParameter<float>&, const AdamWOptions&);
template void adamw_step<double>(BasicParameter<double>&, const AdamWOptions&);

void LrSchedule::validate() const {
    if (!(base_lr > 0.0)) throw ConfigError("lr schedule: base_lr must be positive");
    if (!(min_lr >= 0.0)) throw ConfigError("lr schedule: min_lr must be non-negative");
    if (min_lr > base_lr) throw ConfigError("lr schedule: min_lr exceeds base_lr");
    if (period0 == 0) throw ConfigError("lr schedule: period0 must be positive");
    if (period_mult == 0) throw ConfigError("lr schedule: period_mult must be >= 1");
}

double lr_at(const LrSchedule& schedule, std::uint64_t step) {
    schedule.validate();
    std::uint64_t offset = step;
    std::uint64_t period = schedule.period0;
    if (schedule.period_mult == 1) {
        offset = step % period;
    } else {
        while (offset >= period) {
            offset -= period;
            period *= schedule.period_mult;
        }
    }
    const double phase = static_cast<double>(offset) / static_cast<double>(period);
    return schedule.min_lr + 0.5 * (schedule.base_lr - schedule.min_lr) * (1.0 + std::cos(std::numbers::pi * phase));
}

}  // namespace mmssl
