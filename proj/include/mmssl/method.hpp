// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string_view>

namespace mmssl {

// Pretraining objectives. The three combined methods sum their components unweighted.
enum class Method { instance_cont, multi_cont, generative, con_clu, con_gen, con_clu_gen };

std::string_view to_string(Method m) noexcept;
std::optional<Method> parse_method(std::string_view name) noexcept;

constexpr bool uses_info_nce(Method m) noexcept { return m == Method::instance_cont; }
constexpr bool uses_mms(Method m) noexcept {
    return m == Method::multi_cont || m == Method::con_clu || m == Method::con_gen || m == Method::con_clu_gen;
}
constexpr bool uses_clustering(Method m) noexcept { return m == Method::con_clu || m == Method::con_clu_gen; }
constexpr bool uses_reconstruction(Method m) noexcept {
    return m == Method::generative || m == Method::con_gen || m == Method::con_clu_gen;
}
constexpr bool uses_projection(Method m) noexcept { return uses_info_nce(m) || uses_mms(m); }
// Instance-Cont is visual only; every other method needs all three modalities.
constexpr bool needs_all_modalities(Method m) noexcept { return m != Method::instance_cont; }

}  // namespace mmssl
