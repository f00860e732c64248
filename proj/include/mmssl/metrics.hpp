// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Classification metrics weighted by class support.
//
// Single-label: per-class precision/recall/F1; aggregates are
// sum_c (support_c / N) * metric_c, and weighted accuracy is the support-weighted
// recall (equal to plain accuracy).
//
// Multi-label: each class is a binary problem with P positives and N negatives,
//   WA_c = (TP * N / P + TN) / (2N)
// and aggregates are weighted by positive support.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmssl/feature_store.hpp"
#include "mmssl/tensor.hpp"

namespace mmssl {

inline constexpr const char* kSingleLabelWaccDefinition =
    "support-weighted recall: sum_c (support_c / N) * recall_c, equal to overall accuracy";
inline constexpr const char* kMultiLabelWaccDefinition =
    "per class (TP * N / P + TN) / (2 * N) with P positives and N negatives; aggregate weighted by positive support";

using ConfusionMatrix = std::vector<std::vector<std::uint64_t>>;

struct ClassMetrics {
    std::string name;
    std::uint64_t support = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // Multi-label only.
    double weighted_accuracy = 0.0;
    bool no_positives = false;
    bool no_negatives = false;
    std::array<std::uint64_t, 4> binary_confusion = {0, 0, 0, 0};  // tn, fp, fn, tp
};

struct MetricsReport {
    TaskType task_type = TaskType::single_label;
    double weighted_accuracy = 0.0;
    double weighted_f1 = 0.0;
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    std::uint64_t n_samples = 0;
    std::vector<ClassMetrics> per_class;
    ConfusionMatrix confusion;  // single-label only
};

// Entry [i][j] counts samples of true class i predicted as j.
ConfusionMatrix confusion_matrix(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                                 std::size_t n_classes);

MetricsReport weighted_metrics_single(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                                      std::size_t n_classes, const std::vector<std::string>& class_names = {});

// A score strictly above threshold predicts the class.
MetricsReport weighted_metrics_multilabel(const Tensor& scores, std::span<const MultiLabel> labels, double threshold,
                                          const std::vector<std::string>& class_names = {});

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& doc);

// Header row of class names, then one row per true class.
std::string confusion_csv(const MetricsReport& report);
std::string per_class_csv(const MetricsReport& report);

}  // namespace mmssl
