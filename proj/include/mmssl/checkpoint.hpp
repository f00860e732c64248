// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container:
//   "MMCK", u32 version, u32 header length, header JSON (UTF-8),
//   u32 tensor count, then per tensor: u32 name length, name, MMFT tensor block.
// The header carries the method tag, config snapshot, and training state.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"
#include "mmssl/heads.hpp"
#include "mmssl/method.hpp"

namespace mmssl {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    Method method = Method::con_clu_gen;
    nlohmann::json config = nlohmann::json::object();  // {"heads": ..., "pretrain": ...}
    nlohmann::json state = nlohmann::json::object();   // epoch, global_step, rng_state, step counts
    std::map<std::string, Tensor> tensors;             // parameters, moments, centroids, queue

    HeadsConfig heads_config() const;
    // Model with parameter values (and classifier, when stored) restored.
    ModelBundle model() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& context = "checkpoint");

// Writes every parameter of `model` into `ckpt.tensors`.
void store_model(Checkpoint& ckpt, const ModelBundle& model);

}  // namespace mmssl
