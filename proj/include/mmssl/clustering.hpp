// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Online multi-modal clustering: fused embeddings R = (g_v + g_t + g_a) / 3 are
// pushed into a FIFO of recent batches, and K-means (squared Euclidean, Lloyd
// iterations) is refit over the queue, warm-started from the previous centroids.

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "mmssl/autograd.hpp"
#include "mmssl/tensor.hpp"

namespace mmssl {

struct CentroidSet {
    Tensor centroids;  // [k x dim]
    double inertia = 0.0;

    std::size_t k() const { return centroids.rows(); }
    std::size_t dim() const { return centroids.cols(); }
};

struct KMeansOptions {
    std::size_t k = 8;
    std::size_t max_iters = 10;
    double tol = 1e-4;
    std::uint64_t seed = 0;
    // When set, Lloyd iterations start from these centroids instead of k-means++.
    std::optional<CentroidSet> warm_start;
    // Called with the inertia measured at every assignment step.
    std::function<void(std::size_t iteration, double inertia)> on_iteration;
};

struct KMeansResult {
    CentroidSet centroids;
    std::vector<std::size_t> assignments;
    std::vector<double> inertia_history;
};

KMeansResult kmeans_fit(const Tensor& points, const KMeansOptions& options);

// Nearest centroid by squared Euclidean distance; ties go to the lowest index.
std::vector<std::size_t> assign(const Tensor& points, const Tensor& centroids);

// Sum of squared distances of every point to its assigned centroid.
double inertia(const Tensor& points, const Tensor& centroids, std::span<const std::size_t> assignments);

Tensor fuse_multimodal(const Tensor& video, const Tensor& text, const Tensor& audio);

template <typename T>
Var fuse_multimodal(Tape<T>& tape, Var video, Var text, Var audio);

class ClusterQueue {
public:
    explicit ClusterQueue(std::size_t capacity_batches = 4);

    // Oldest batch is evicted once capacity is exceeded.
    void push(Tensor batch);
    // Retained batches concatenated oldest first; [0 x 0] when empty.
    Tensor snapshot() const;

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t batches() const noexcept { return buffer_.size(); }
    std::size_t rows() const noexcept;
    const std::deque<Tensor>& contents() const noexcept { return buffer_; }
    void clear() { buffer_.clear(); }

private:
    std::size_t capacity_;
    std::deque<Tensor> buffer_;
};

}  // namespace mmssl
