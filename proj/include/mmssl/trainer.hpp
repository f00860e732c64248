// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pretraining loops for the six self-supervised methods and the downstream
// protocols (linear evaluation, finetuning, supervised training from scratch).

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmssl/checkpoint.hpp"
#include "mmssl/clustering.hpp"
#include "mmssl/feature_store.hpp"
#include "mmssl/heads.hpp"
#include "mmssl/losses.hpp"
#include "mmssl/metrics.hpp"
#include "mmssl/optim.hpp"

namespace mmssl {

struct AugmentConfig {
    double noise_sigma = 0.1;
    double mask_prob = 0.1;
};

struct PretrainConfig {
    Method method = Method::con_clu_gen;
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    double lr = 0.00009;
    double weight_decay = 0.00032;
    // Cosine restarts. period0 = 0 means one period spanning the whole run.
    double min_lr = 0.0;
    std::uint64_t period0 = 0;
    std::uint64_t period_mult = 1;
    LossConfig loss;
    std::size_t clusters = 8;
    std::size_t queue_batches = 4;
    // 1-based; clustering contributes exactly 0 in earlier epochs.
    std::size_t cluster_start_epoch = 12;
    std::size_t kmeans_iters = 10;
    double kmeans_tol = 1e-4;
    std::size_t representation_dim = 128;
    std::size_t hidden_dim = 128;
    std::size_t projection_dim = 128;
    std::size_t cluster_dim = 64;
    AugmentConfig augment;
    std::uint64_t seed = 0;

    // Learning rate and weight decay used for each method during pretraining.
    static PretrainConfig for_method(Method method);

    void validate() const;
    LrSchedule schedule(std::size_t steps_per_epoch) const;
};

void to_json(nlohmann::json& j, const PretrainConfig& cfg);
// Missing keys keep the method's defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, PretrainConfig& cfg);

struct LogRow {
    std::size_t epoch = 0;  // 1-based
    std::uint64_t step = 0;
    double lr = 0.0;
    LossBreakdown losses;
};

// Columns: epoch, step, lr, total, mms, clustering, reconstruction, info_nce.
std::string log_csv(const std::vector<LogRow>& rows);
void write_log_csv(const std::filesystem::path& path, const std::vector<LogRow>& rows);

class Pretrainer {
public:
    Pretrainer(PretrainConfig cfg, const DatasetInfo& info);
    static Pretrainer resume(const Checkpoint& ckpt);

    // Runs one epoch over the training split.
    void train_epoch(std::span<const SampleRecord> train);
    // Runs epochs until `until_epoch` (default: cfg.epochs) have completed.
    void run(std::span<const SampleRecord> train, std::optional<std::size_t> until_epoch = std::nullopt);

    Checkpoint checkpoint() const;

    const PretrainConfig& config() const noexcept { return cfg_; }
    ModelBundle& model() noexcept { return model_; }
    const ModelBundle& model() const noexcept { return model_; }
    const std::vector<LogRow>& log() const noexcept { return log_; }
    std::size_t epochs_done() const noexcept { return epochs_done_; }
    std::uint64_t global_step() const noexcept { return global_step_; }
    const std::optional<CentroidSet>& centroids() const noexcept { return centroids_; }
    bool clustering_active(std::size_t epoch) const noexcept;

    // One optimization step on a prepared batch; exposed for gradient-routing checks.
    // When apply_update is false, gradients are left in the parameters and no update happens.
    LogRow step(const Batch& batch, std::size_t epoch, std::size_t steps_per_epoch, bool apply_update = true);

private:
    std::vector<Parameter*> active_parameters(bool clustering_on);

    PretrainConfig cfg_;
    DatasetInfo info_;
    ModelBundle model_;
    ClusterQueue queue_;
    std::optional<CentroidSet> centroids_;
    Rng rng_;
    std::size_t epochs_done_ = 0;
    std::uint64_t global_step_ = 0;
    std::vector<LogRow> log_;
};

struct PretrainResult {
    Checkpoint checkpoint;
    std::vector<LogRow> log;
};

PretrainResult pretrain(const PretrainConfig& cfg, const Dataset& dataset);

enum class DownstreamMode { linear_eval, finetune, supervised_scratch };

std::string_view to_string(DownstreamMode m) noexcept;
std::optional<DownstreamMode> parse_downstream_mode(std::string_view name) noexcept;

struct DownstreamConfig {
    DownstreamMode mode = DownstreamMode::linear_eval;
    TaskType task_type = TaskType::single_label;
    FusionMode fusion = FusionMode::concat;
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    double lr = 0.00996;
    double weight_decay = 0.00007;
    double threshold = 0.5;
    // Fraction of the labeled training split used (a seeded subset).
    double label_fraction = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const DownstreamConfig& cfg);
void from_json(const nlohmann::json& j, DownstreamConfig& cfg);

struct DownstreamResult {
    ModelBundle model;
    MetricsReport report;
    std::vector<double> epoch_losses;
};

// Trains a classifier on the train split and reports metrics on the test split.
// linear_eval freezes every pretrained tensor; finetune also updates the
// representation heads; supervised_scratch ignores the pretrained values.
DownstreamResult attach_probe_and_train(const ModelBundle& pretrained, const Dataset& dataset,
                                        const DownstreamConfig& cfg);
DownstreamResult attach_probe_and_train(const Checkpoint& ckpt, const Dataset& dataset, const DownstreamConfig& cfg);

// Forward pass through the trained classifier: logits [N x n_classes].
Tensor predict_logits(ModelBundle& model, std::span<const SampleRecord> records, FusionMode fusion);

}  // namespace mmssl
