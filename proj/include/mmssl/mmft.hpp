// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0
//
// MMFT tensor blocks: "MMFT", u32 version (1), u32 rank, rank x u32 dims,
// then float32 payload. Everything little-endian.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "mmssl/tensor.hpp"

namespace mmssl::mmft {

inline constexpr char kMagic[4] = {'M', 'M', 'F', 'T'};
inline constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v);
std::uint32_t read_u32(std::istream& is, const std::string& context);

void write_tensor(std::ostream& os, const Tensor& t);
// `context` names the file or entry in error messages.
Tensor read_tensor(std::istream& is, const std::string& context);

void save(const std::filesystem::path& path, const Tensor& t);
Tensor load(const std::filesystem::path& path);

}  // namespace mmssl::mmft
