// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <sstream>

#include "mmssl/method.hpp"
#include "mmssl/modality.hpp"
#include "mmssl/rng.hpp"
#include "mmssl/tensor.hpp"

namespace mmssl {

std::string_view to_string(Modality m) noexcept {
    switch (m) {
        case Modality::video: return "video";
        case Modality::text: return "text";
        case Modality::audio: return "audio";
    }
    return "unknown";
}

std::optional<Modality> parse_modality(std::string_view name) noexcept {
    for (const Modality m : kAllModalities) {
        if (to_string(m) == name) return m;
    }
    return std::nullopt;
}

std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::instance_cont: return "InstanceCont";
        case Method::multi_cont: return "MultiCont";
        case Method::generative: return "Generative";
        case Method::con_clu: return "ConClu";
        case Method::con_gen: return "ConGen";
        case Method::con_clu_gen: return "ConCluGen";
    }
    return "unknown";
}

std::optional<Method> parse_method(std::string_view name) noexcept {
    for (const Method m : {Method::instance_cont, Method::multi_cont, Method::generative, Method::con_clu,
                           Method::con_gen, Method::con_clu_gen}) {
        if (to_string(m) == name) return m;
    }
    return std::nullopt;
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor stack_rows(std::span<const Tensor> rows) {
    if (rows.empty()) return Tensor(Shape{0, 0});
    const std::size_t dim = rows[0].size();
    std::vector<float> data;
    data.reserve(rows.size() * dim);
    for (const Tensor& r : rows) {
        if (r.size() != dim) {
            throw DimensionError("stack_rows: row of shape " + shape_string(r.shape()) + " in a stack of width " +
                                 std::to_string(dim));
        }
        data.insert(data.end(), r.data().begin(), r.data().end());
    }
    return Tensor(Shape{rows.size(), dim}, std::move(data));
}

double Rng::normal() {
    // 1 - uniform() lies in (0, 1], so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::size_t Rng::below(std::size_t n) {
    if (n == 0) throw ContractError("Rng::below: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return static_cast<std::size_t>(x % bound);
}

std::string Rng::state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::set_state(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
    if (!is) throw DataError("rng: malformed engine state");
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace mmssl
