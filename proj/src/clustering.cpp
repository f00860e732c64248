// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmssl/clustering.hpp"

#include <limits>

#include "mmssl/rng.hpp"

namespace mmssl {
namespace {

double squared_distance(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

Tensor kmeanspp_init(const Tensor& points, std::size_t k, std::uint64_t seed) {
    const std::size_t n = points.rows(), dim = points.cols();
    Rng rng(seed);
    Tensor centroids(Shape{k, dim});
    std::vector<std::uint8_t> chosen(n, 0);
    std::vector<double> best(n, std::numeric_limits<double>::infinity());

    std::size_t pick = rng.below(n);
    for (std::size_t c = 0; c < k; ++c) {
        chosen[pick] = 1;
        std::copy(points.row(pick).begin(), points.row(pick).end(), centroids.row(c).begin());
        if (c + 1 == k) break;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            best[i] = std::min(best[i], squared_distance(points.row(i), centroids.row(c)));
            total += best[i];
        }
        if (total <= 0.0) {
            // Every point coincides with a chosen centroid; take the next unused one.
            pick = 0;
            while (pick < n && chosen[pick] != 0) ++pick;
            if (pick == n) pick = 0;
            continue;
        }
        const double target = rng.uniform() * total;
        double running = 0.0;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            running += best[i];
            if (running > target && best[i] > 0.0) {
                pick = i;
                break;
            }
        }
    }
    return centroids;
}

}  // namespace

std::vector<std::size_t> assign(const Tensor& points, const Tensor& centroids) {
    if (points.rank() != 2 || centroids.rank() != 2 || points.cols() != centroids.cols()) {
        throw DimensionError("assign: points " + shape_string(points.shape()) + " vs centroids " +
                             shape_string(centroids.shape()));
    }
    std::vector<std::size_t> labels(points.rows(), 0);
    for (std::size_t i = 0; i < points.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.rows(); ++c) {
            const double d = squared_distance(points.row(i), centroids.row(c));
            if (d < best) {
                best = d;
                labels[i] = c;
            }
        }
    }
    return labels;
}

double inertia(const Tensor& points, const Tensor& centroids, std::span<const std::size_t> assignments) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        total += squared_distance(points.row(i), centroids.row(assignments[i]));
    }
    return total;
}

KMeansResult kmeans_fit(const Tensor& points, const KMeansOptions& options) {
    if (points.rank() != 2 || points.rows() == 0) throw ContractError("kmeans_fit: no points to cluster");
    const std::size_t n = points.rows(), dim = points.cols(), k = options.k;
    if (k == 0) throw ContractError("kmeans_fit: k must be positive");
    if (n < k) {
        throw ContractError("kmeans_fit: need at least k=" + std::to_string(k) + " points, got " + std::to_string(n));
    }

    Tensor centroids;
    if (options.warm_start) {
        const Tensor& prev = options.warm_start->centroids;
        if (prev.rank() != 2 || prev.rows() != k || prev.cols() != dim) {
            throw ContractError("kmeans_fit: warm start centroids " + shape_string(prev.shape()) + " do not match k=" +
                                std::to_string(k) + ", dim=" + std::to_string(dim));
        }
        centroids = prev;
    } else {
        centroids = kmeanspp_init(points, k, options.seed);
    }

    KMeansResult result;
    std::vector<std::size_t> labels = assign(points, centroids);
    double current = inertia(points, centroids, labels);
    result.inertia_history.push_back(current);
    if (options.on_iteration) options.on_iteration(0, current);

    std::vector<double> sums(k * dim);
    std::vector<std::size_t> counts(k);
    for (std::size_t iter = 1; iter <= options.max_iters; ++iter) {
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = labels[i];
            ++counts[c];
            for (std::size_t d = 0; d < dim; ++d) sums[c * dim + d] += points(i, d);
        }
        Tensor updated = centroids;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d) {
                updated(c, d) = static_cast<float>(sums[c * dim + d] / static_cast<double>(counts[c]));
            }
        }
        // Empty clusters restart at the point farthest from its current centroid.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = squared_distance(points.row(i), updated.row(labels[i]));
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            std::copy(points.row(far).begin(), points.row(far).end(), updated.row(c).begin());
            counts[c] = 1;
        }
        auto next_labels = assign(points, updated);
        const double next = inertia(points, updated, next_labels);
        if (next > current) break;  // float rounding of the means can only make things worse from here
        centroids = std::move(updated);
        labels = std::move(next_labels);
        const double improvement = current - next;
        current = next;
        result.inertia_history.push_back(current);
        if (options.on_iteration) options.on_iteration(iter, current);
        if (improvement < options.tol) break;
    }
    result.centroids = CentroidSet{std::move(centroids), current};
    result.assignments = std::move(labels);
    return result;
}

Tensor fuse_multimodal(const Tensor& video, const Tensor& text, const Tensor& audio) {
    if (video.shape() != text.shape() || video.shape() != audio.shape()) {
        throw DimensionError("fuse_multimodal: shapes " + shape_string(video.shape()) + ", " +
                             shape_string(text.shape()) + ", " + shape_string(audio.shape()));
    }
    Tensor out(video.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>((static_cast<double>(video[i]) + text[i] + audio[i]) / 3.0);
    }
    return out;
}

template <typename T>
Var fuse_multimodal(Tape<T>& tape, Var video, Var text, Var audio) {
    const Var parts[] = {video, text, audio};
    return ops::mean_of(tape, std::span<const Var>(parts));
}

template Var fuse_multimodal<float>(Tape<float>&, Var, Var, Var);
template Var fuse_multimodal<double>(Tape<double>&, Var, Var, Var);

ClusterQueue::ClusterQueue(std::size_t capacity_batches) : capacity_(capacity_batches) {
    if (capacity_ == 0) throw ConfigError("cluster queue: capacity must be positive");
}

void ClusterQueue::push(Tensor batch) {
    if (batch.rank() != 2) throw DimensionError("cluster queue: batches must be matrices");
    if (!buffer_.empty() && buffer_.front().cols() != batch.cols()) {
        throw DimensionError("cluster queue: batch width " + std::to_string(batch.cols()) + " differs from " +
                             std::to_string(buffer_.front().cols()));
    }
    buffer_.push_back(std::move(batch));
    while (buffer_.size() > capacity_) buffer_.pop_front();
}

std::size_t ClusterQueue::rows() const noexcept {
    std::size_t total = 0;
    for (const Tensor& b : buffer_) total += b.rows();
    return total;
}

Tensor ClusterQueue::snapshot() const {
    if (buffer_.empty()) return Tensor(Shape{0, 0});
    const std::size_t cols = buffer_.front().cols();
    std::vector<float> data;
    data.reserve(rows() * cols);
    for (const Tensor& b : buffer_) data.insert(data.end(), b.data().begin(), b.data().end());
    return Tensor(Shape{rows(), cols}, std::move(data));
}

}  // namespace mmssl
