// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

#include "mmssl/parameter.hpp"

namespace mmssl {

struct AdamWOptions {
    double lr = 1e-3;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

// One AdamW update with bias correction. The decoupled decay term
// value <- value - lr * weight_decay * value is applied apart from the adaptive step.
// Throws OptimizerError if the gradient holds NaN/Inf.
template <typename T>
void adamw_step(BasicParameter<T>& param, const AdamWOptions& options);

template <typename T>
void zero_grads(std::span<BasicParameter<T>* const> params) {
    for (auto* p : params) p->zero_grad();
}

// Cosine annealing with warm restarts. Period i lasts period0 * period_mult^i steps.
struct LrSchedule {
    double base_lr = 1e-3;
    double min_lr = 0.0;
    std::uint64_t period0 = 100;
    std::uint64_t period_mult = 1;

    void validate() const;
};

double lr_at(const LrSchedule& schedule, std::uint64_t step);

}  // namespace mmssl
