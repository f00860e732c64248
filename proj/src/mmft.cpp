// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmssl/mmft.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace mmssl::mmft {
namespace {

// Guards against absurd headers in corrupt files before allocating.
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) {
    const std::array<char, 4> bytes = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(bytes.data(), 4);
}

std::uint32_t read_u32(std::istream& is, const std::string& context) {
    std::array<unsigned char, 4> bytes{};
    is.read(reinterpret_cast<char*>(bytes.data()), 4);
    if (!is) throw DataError(context + ": truncated header");
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void write_tensor(std::ostream& os, const Tensor& t) {
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (const std::size_t d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
    for (const float v : t.data()) write_u32(os, std::bit_cast<std::uint32_t>(v));
}

Tensor read_tensor(std::istream& is, const std::string& context) {
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw DataError(context + ": bad magic, not an MMFT tensor");
    const std::uint32_t version = read_u32(is, context);
    if (version != kVersion) {
        throw DataError(context + ": unsupported MMFT version " + std::to_string(version));
    }
    const std::uint32_t rank = read_u32(is, context);
    if (rank > kMaxRank) throw DataError(context + ": implausible rank " + std::to_string(rank));
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& d : shape) {
        d = read_u32(is, context);
        count *= d;
        if (count > kMaxElements) throw DataError(context + ": implausible tensor size");
    }
    std::vector<float> data(static_cast<std::size_t>(count));
    for (auto& v : data) {
        std::array<unsigned char, 4> bytes{};
        is.read(reinterpret_cast<char*>(bytes.data()), 4);
        if (!is) throw DataError(context + ": truncated payload");
        const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
                                   (static_cast<std::uint32_t>(bytes[2]) << 16) |
                                   (static_cast<std::uint32_t>(bytes[3]) << 24);
        v = std::bit_cast<float>(bits);
    }
    return Tensor(std::move(shape), std::move(data));
}

void save(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    write_tensor(os, t);
    if (!os) throw DataError("write failed: " + path.string());
}

Tensor load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingFileError("missing feature file: " + path.string());
    return read_tensor(is, path.string());
}

}  // namespace mmssl::mmft
