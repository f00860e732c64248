// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "mmssl/tensor.hpp"

namespace mmssl {

// Trainable tensor with its gradient slot and AdamW moment buffers.
template <typename T>
struct BasicParameter {
    BasicParameter(std::string param_name, BasicTensor<T> initial)
        : name(std::move(param_name)),
          value(std::move(initial)),
          grad(value.shape()),
          moment1(value.shape()),
          moment2(value.shape()) {}

    void zero_grad() { grad.fill(T{0}); }

    std::string name;
    BasicTensor<T> value;
    BasicTensor<T> grad;
    BasicTensor<T> moment1;
    BasicTensor<T> moment2;
    std::uint64_t step_count = 0;
};

using Parameter = BasicParameter<float>;
using ParameterD = BasicParameter<double>;

}  // namespace mmssl
