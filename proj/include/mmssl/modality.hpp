// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace mmssl {

enum class Modality : std::size_t { video = 0, text = 1, audio = 2 };

inline constexpr std::size_t kNumModalities = 3;
inline constexpr std::array<Modality, kNumModalities> kAllModalities = {Modality::video, Modality::text,
                                                                        Modality::audio};

constexpr std::size_t index_of(Modality m) noexcept { return static_cast<std::size_t>(m); }

std::string_view to_string(Modality m) noexcept;
std::optional<Modality> parse_modality(std::string_view name) noexcept;

template <typename T>
using ModalityArray = std::array<T, kNumModalities>;

// Per-modality slots where some modalities may be absent.
template <typename T>
using ModalityMap = std::array<std::optional<T>, kNumModalities>;

using ModalityDims = ModalityArray<std::size_t>;

}  // namespace mmssl
