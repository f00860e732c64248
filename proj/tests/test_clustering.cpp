// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "grad_check.hpp"
#include "mmssl/clustering.hpp"
#include "mmssl/error.hpp"

using namespace mmssl;
using mmssl::testing::grad_check;
using mmssl::testing::kFdRelTol;
using mmssl::testing::random_tensor;

namespace {

Tensor random_points(std::size_t n, std::size_t d, Rng& rng, double scale = 1.0) {
    return random_tensor({n, d}, rng, scale).cast<float>();
}

double sq_dist(const Tensor& a, std::size_t i, const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.cols(); ++d) s += (a(i, d) - c[d]) * (a(i, d) - c[d]);
    return s;
}

// Exhaustive search over all 2-way partitions.
struct TwoClusterOptimum {
    double inertia = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> means;
};

TwoClusterOptimum brute_force_two_clusters(const Tensor& pts) {
    const std::size_t n = pts.rows(), dim = pts.cols();
    TwoClusterOptimum best;
    for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
        std::vector<std::vector<double>> means(2, std::vector<double>(dim, 0.0));
        std::size_t counts[2] = {0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t g = (mask >> i) & 1u;
            ++counts[g];
            for (std::size_t d = 0; d < dim; ++d) means[g][d] += pts(i, d);
        }
        for (std::size_t g = 0; g < 2; ++g) {
            for (auto& v : means[g]) v /= static_cast<double>(counts[g]);
        }
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += sq_dist(pts, i, means[(mask >> i) & 1u]);
        if (total < best.inertia) {
            best.inertia = total;
            best.means = means;
        }
    }
    return best;
}

}  // namespace

// assign

TEST(Assign, ExactMatchAndTieBreak) {
    const Tensor c = Tensor::matrix({{0, 0}, {2, 0}, {5, 5}});
    EXPECT_EQ(assign(Tensor::matrix({{5, 5}}), c), std::vector<std::size_t>{2});
    EXPECT_EQ(assign(Tensor::matrix({{1, 0}}), c), std::vector<std::size_t>{0});
}

TEST(Assign, MatchesExhaustiveScan) {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.below(20), k = 1 + rng.below(8), d = 1 + rng.below(6);
        const Tensor p = random_points(n, d, rng), c = random_points(k, d, rng);
        const auto got = assign(p, c);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t arg = 0;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < k; ++j) {
                double s = 0.0;
                for (std::size_t x = 0; x < d; ++x) s += (double(p(i, x)) - c(j, x)) * (double(p(i, x)) - c(j, x));
                if (s < best) {
                    best = s;
                    arg = j;
                }
            }
            EXPECT_EQ(got[i], arg);
        }
    }
}

TEST(Assign, DimensionMismatchThrows) {
    EXPECT_THROW(assign(Tensor(Shape{2, 3}), Tensor(Shape{2, 4})), DimensionError);
}

// kmeans_fit

TEST(KMeans, KEqualsNReproducesPoints) {
    Rng rng(2);
    const Tensor p = random_points(6, 3, rng);
    KMeansOptions opt;
    opt.k = 6;
    const auto r = kmeans_fit(p, opt);
    EXPECT_EQ(r.centroids.inertia, 0.0);
    for (std::size_t i = 0; i < 6; ++i) {
        const std::size_t c = r.assignments[i];
        for (std::size_t d = 0; d < 3; ++d) EXPECT_EQ(r.centroids.centroids(c, d), p(i, d));
    }
}

TEST(KMeans, TwoSeparatedGroupsRecoverGroupMeans) {
    Rng rng(3);
    const double eps = 1e-3;
    Tensor p(Shape{10, 2});
    for (std::size_t i = 0; i < 10; ++i) {
        const float base = i < 5 ? 0.0f : 10.0f;
        p(i, 0) = base + static_cast<float>(eps * (2.0 * rng.uniform() - 1.0));
        p(i, 1) = base + static_cast<float>(eps * (2.0 * rng.uniform() - 1.0));
    }
    KMeansOptions opt;
    opt.k = 2;
    const auto r = kmeans_fit(p, opt);
    const auto oracle = brute_force_two_clusters(p);
    EXPECT_NEAR(r.centroids.inertia, oracle.inertia, 1e-6);
    for (const auto& mean : oracle.means) {
        double closest = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < 2; ++c) {
            closest = std::min(closest, std::max(std::abs(r.centroids.centroids(c, 0) - mean[0]),
                                                 std::abs(r.centroids.centroids(c, 1) - mean[1])));
        }
        EXPECT_LT(closest, 1e-3);
        EXPECT_LT(std::abs(mean[0] - (mean[0] < 5 ? 0.0 : 10.0)), eps);
    }
}

TEST(KMeans, OneLloydIterationMatchesHandStep) {
    const Tensor p = Tensor::matrix({{0, 0}, {1, 0}, {0, 1}, {4, 4}, {5, 4}});
    KMeansOptions opt;
    opt.k = 2;
    opt.max_iters = 1;
    opt.warm_start = CentroidSet{Tensor::matrix({{0, 0}, {1, 1}}), 0.0};
    const auto r = kmeans_fit(p, opt);
    // Initial assignment: (0,0) -> 0; (1,0), (0,1) tie at distance 1 -> 0; (4,4), (5,4) -> 1.
    // Updated centroids: mean of the first three, mean of the last two.
    EXPECT_FLOAT_EQ(r.centroids.centroids(0, 0), 1.0f / 3.0f);
    EXPECT_FLOAT_EQ(r.centroids.centroids(0, 1), 1.0f / 3.0f);
    EXPECT_FLOAT_EQ(r.centroids.centroids(1, 0), 4.5f);
    EXPECT_FLOAT_EQ(r.centroids.centroids(1, 1), 4.0f);
    EXPECT_EQ(r.assignments, (std::vector<std::size_t>{0, 0, 0, 1, 1}));
    const double expected = 2.0 / 9 + 5.0 / 9 + 5.0 / 9 + 0.25 + 0.25;
    EXPECT_NEAR(r.centroids.inertia, expected, 1e-6);
}

TEST(KMeans, InertiaNeverIncreases) {
    Rng rng(4);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 1 + rng.below(8);
        const std::size_t n = k + rng.below(64 - k + 1);
        const Tensor p = random_points(n, 1 + rng.below(6), rng, 1.0 + 4.0 * rng.uniform());
        KMeansOptions opt;
        opt.k = k;
        opt.seed = rng.next_u64();
        double previous = std::numeric_limits<double>::infinity();
        opt.on_iteration = [&](std::size_t, double value) {
            EXPECT_LE(value, previous) << "trial " << trial;
            previous = value;
        };
        const auto r = kmeans_fit(p, opt);
        EXPECT_GE(r.centroids.inertia, 0.0);
        EXPECT_TRUE(r.centroids.centroids.all_finite());
        EXPECT_NEAR(r.centroids.inertia, inertia(p, r.centroids.centroids, r.assignments), 1e-6 * (1 + r.centroids.inertia));
    }
}

TEST(KMeans, WarmStartOnConvergedDataBarelyMoves) {
    Rng rng(5);
    const Tensor p = random_points(40, 3, rng);
    KMeansOptions opt;
    opt.k = 4;
    opt.max_iters = 100;
    opt.tol = 0.0;
    const auto first = kmeans_fit(p, opt);
    KMeansOptions again;
    again.k = 4;
    again.warm_start = first.centroids;
    const auto second = kmeans_fit(p, again);
    for (std::size_t i = 0; i < first.centroids.centroids.size(); ++i) {
        EXPECT_LT(std::abs(first.centroids.centroids[i] - second.centroids.centroids[i]), again.tol);
    }
}

TEST(KMeans, DeterministicPerSeed) {
    Rng rng(6);
    const Tensor p = random_points(30, 4, rng);
    KMeansOptions opt;
    opt.k = 5;
    opt.seed = 9;
    const auto a = kmeans_fit(p, opt), b = kmeans_fit(p, opt);
    EXPECT_EQ(a.centroids.centroids, b.centroids.centroids);
    EXPECT_EQ(a.assignments, b.assignments);
}

TEST(KMeans, DuplicatePointsStillYieldKCentroids) {
    const Tensor p = Tensor::matrix({{1, 1}, {1, 1}, {1, 1}, {2, 2}});
    KMeansOptions opt;
    opt.k = 3;
    const auto r = kmeans_fit(p, opt);
    EXPECT_EQ(r.centroids.k(), 3u);
    EXPECT_TRUE(r.centroids.centroids.all_finite());
}

TEST(KMeans, RejectsTooFewPointsAndBadWarmStart) {
    KMeansOptions opt;
    opt.k = 3;
    EXPECT_THROW(kmeans_fit(Tensor(Shape{2, 2}), opt), ContractError);
    EXPECT_THROW(kmeans_fit(Tensor(Shape{0, 0}), opt), ContractError);
    opt.warm_start = CentroidSet{Tensor(Shape{2, 2}), 0.0};
    EXPECT_THROW(kmeans_fit(Tensor(Shape{5, 2}), opt), ContractError);
}

// fuse_multimodal

TEST(Fuse, IdenticalInputsAreIdempotent) {
    const Tensor x = Tensor::matrix({{1, 2, 3}, {-1, 0, 0.5f}});
    EXPECT_EQ(fuse_multimodal(x, x, x), x);
}

TEST(Fuse, UniformMean) {
    const Tensor r = fuse_multimodal(Tensor::matrix({{1, 0, 0}}), Tensor::matrix({{0, 1, 0}}),
                                     Tensor::matrix({{0, 0, 1}}));
    for (const float v : r.data()) EXPECT_FLOAT_EQ(v, 1.0f / 3.0f);
}

TEST(Fuse, PermutationInvariant) {
    Rng rng(7);
    const Tensor a = random_points(3, 4, rng), b = random_points(3, 4, rng), c = random_points(3, 4, rng);
    EXPECT_EQ(fuse_multimodal(a, b, c), fuse_multimodal(c, a, b));
    EXPECT_EQ(fuse_multimodal(a, b, c), fuse_multimodal(b, c, a));
}

TEST(Fuse, TapeMatchesPlainAndShapeMismatchThrows) {
    Rng rng(8);
    const Tensor a = random_points(3, 4, rng), b = random_points(3, 4, rng), c = random_points(3, 4, rng);
    Tape<float> tape;
    const Tensor fused = tape.value(fuse_multimodal(tape, tape.constant(a), tape.constant(b), tape.constant(c)));
    for (std::size_t i = 0; i < fused.size(); ++i) EXPECT_NEAR(fused[i], fuse_multimodal(a, b, c)[i], 1e-6);
    EXPECT_THROW(fuse_multimodal(a, b, Tensor(Shape{3, 5})), DimensionError);
}

TEST(Fuse, GradientIsOneThirdIdentity) {
    Tape<double> tape;
    Rng rng(9);
    const Var v = tape.input(random_tensor({2, 3}, rng));
    const Var t = tape.input(random_tensor({2, 3}, rng));
    const Var a = tape.input(random_tensor({2, 3}, rng));
    const Var r = fuse_multimodal(tape, v, t, a);
    tape.backward(ops::mean(tape, r));
    // d mean(R) / d g_m = (1/3) * (1/6) for every element.
    for (const Var g : {v, t, a}) {
        for (const double x : tape.grad(g).data()) EXPECT_DOUBLE_EQ(x, 1.0 / 18.0);
    }
    const auto check = grad_check(
        [](Tape<double>& tp, const std::vector<Var>& in) {
            const Var fused = fuse_multimodal(tp, in[0], in[1], in[2]);
            return ops::mse(tp, fused, tp.constant(TensorD::matrix({{1, -1, 0.5}, {0, 2, -3}})));
        },
        {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)});
    EXPECT_LE(check.max_rel_error, kFdRelTol) << check.worst;
}

// ClusterQueue

TEST(ClusterQueue, EvictsOldestBatch) {
    ClusterQueue q(4);
    for (int b = 1; b <= 5; ++b) q.push(Tensor::filled(Shape{2, 3}, static_cast<float>(b)));
    EXPECT_EQ(q.batches(), 4u);
    const Tensor snap = q.snapshot();
    ASSERT_EQ(snap.shape(), (Shape{8, 3}));
    for (std::size_t r = 0; r < 8; ++r) EXPECT_EQ(snap(r, 0), static_cast<float>(2 + r / 2));
}

TEST(ClusterQueue, EmptySnapshotIsRefusedByKMeans) {
    ClusterQueue q;
    EXPECT_EQ(q.capacity(), 4u);
    const Tensor snap = q.snapshot();
    EXPECT_EQ(snap.size(), 0u);
    KMeansOptions opt;
    EXPECT_THROW(kmeans_fit(snap, opt), ContractError);
}

TEST(ClusterQueue, RowCountIsSumOfBatchSizes) {
    ClusterQueue q(3);
    q.push(Tensor(Shape{2, 4}));
    q.push(Tensor(Shape{5, 4}));
    EXPECT_EQ(q.rows(), 7u);
    EXPECT_EQ(q.snapshot().rows(), 7u);
    q.push(Tensor(Shape{1, 4}));
    q.push(Tensor(Shape{3, 4}));
    EXPECT_EQ(q.rows(), 9u);
    EXPECT_THROW(q.push(Tensor(Shape{1, 5})), DimensionError);
    EXPECT_THROW(ClusterQueue(0), ConfigError);
}
