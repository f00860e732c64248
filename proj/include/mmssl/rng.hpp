// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

namespace mmssl {

// Deterministic random source. Distributions are derived from raw engine bits so
// sequences are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Standard normal via Box-Muller; consumes exactly two draws.
    double normal();
    // Unbiased integer in [0, n).
    std::size_t below(std::size_t n);

    std::string state() const;
    void set_state(const std::string& state);

private:
    std::mt19937_64 engine_;
};

// splitmix64 finalizer; used to derive independent stream seeds from (seed, counter).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

}  // namespace mmssl
