// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Precomputed per-modality features on disk: a JSON manifest listing samples per
// split, and one MMFT file per (sample, modality). Feature files hold either a
// single time-averaged vector [dim] or a sequence [steps x dim] that is averaged
// on read.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mmssl/modality.hpp"
#include "mmssl/tensor.hpp"

namespace mmssl {

enum class TaskType { single_label, multi_label, unlabeled };

std::string_view to_string(TaskType t) noexcept;
std::optional<TaskType> parse_task_type(std::string_view name) noexcept;

enum class Split : std::size_t { train = 0, val = 1, test = 2 };
inline constexpr std::array<Split, 3> kAllSplits = {Split::train, Split::val, Split::test};
std::string_view to_string(Split s) noexcept;

using MultiLabel = std::vector<std::uint8_t>;
// No label, a class index, or a binary vector with one entry per class.
using Label = std::variant<std::monostate, std::size_t, MultiLabel>;

struct SampleRecord {
    std::string sample_id;
    ModalityMap<Tensor> features;
    Label label;
};

struct DatasetInfo {
    std::string name;
    TaskType task_type = TaskType::unlabeled;
    std::vector<std::string> class_names;
    ModalityMap<std::size_t> modality_dims;

    bool has(Modality m) const { return modality_dims[index_of(m)].has_value(); }
    std::size_t dim(Modality m) const;
    std::size_t n_classes() const { return class_names.size(); }
};

// Reference to one sample's files; paths are relative to the manifest directory.
struct SampleRef {
    std::string sample_id;
    ModalityMap<std::string> paths;
    Label label;
};

struct Manifest {
    DatasetInfo info;
    std::array<std::vector<SampleRef>, 3> splits;
    std::filesystem::path base_dir;

    const std::vector<SampleRef>& split(Split s) const { return splits[static_cast<std::size_t>(s)]; }
};

struct Dataset {
    DatasetInfo info;
    std::array<std::vector<SampleRecord>, 3> splits;

    const std::vector<SampleRecord>& split(Split s) const { return splits[static_cast<std::size_t>(s)]; }
    std::vector<SampleRecord>& split(Split s) { return splits[static_cast<std::size_t>(s)]; }
};

// Parses and validates the manifest document. Feature files are not touched.
Manifest load_manifest(const std::filesystem::path& path);

// Reads one sample's feature files, checking magic and dims against the manifest.
SampleRecord read_record(const Manifest& manifest, const SampleRef& ref);

Dataset load_dataset(const std::filesystem::path& manifest_path);
Dataset load_dataset(const Manifest& manifest);

// Writes manifest.json plus features/<sample>.<modality>.mmft under `dir`.
// Returns the manifest path.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Elementwise mean over time steps.
Tensor average_over_time(std::span<const Tensor> sequence);

// Every value greater than 0 becomes 1.
MultiLabel binarize_labels(std::span<const double> values);

struct Batch {
    std::vector<std::size_t> indices;  // into the split
    ModalityMap<Tensor> features;      // [B x dim] per modality present in every record
    std::vector<Label> labels;

    std::size_t size() const noexcept { return indices.size(); }
};

struct BatchOptions {
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    std::uint64_t epoch = 0;
    bool drop_last = true;
    // Contrastive objectives need in-batch negatives, so batch_size must be >= 2.
    bool contrastive = false;
};

// Permutation of [0, n) determined solely by (seed, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

std::vector<Batch> make_batches(std::span<const SampleRecord> split, const BatchOptions& options);

// Stacks the given records (in order) into one batch.
Batch gather_batch(std::span<const SampleRecord> split, std::span<const std::size_t> indices);

}  // namespace mmssl
