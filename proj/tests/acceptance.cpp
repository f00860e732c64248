// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion, with the measured values.
// Exits non-zero when any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "grad_check.hpp"
#include "loss_oracles.hpp"
#include "mmssl/cli.hpp"
#include "mmssl/clustering.hpp"
#include "mmssl/losses.hpp"
#include "mmssl/synth.hpp"
#include "mmssl/trainer.hpp"

using namespace mmssl;
using namespace mmssl::testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr Method kAllMethods[] = {Method::instance_cont, Method::multi_cont, Method::generative,
                                   Method::con_clu,       Method::con_gen,    Method::con_clu_gen};

// Pinned tolerances.
constexpr double kGradRelTol = kFdRelTol;       // 1e-4
constexpr double kGradBudgetSeconds = 60.0;
constexpr double kOracleAbsTol = 1e-6;
constexpr double kGroupMeanTol = 1e-3;
constexpr double kOrderingGap = 0.02;           // 2 percentage points
constexpr double kOrderingBudgetSeconds = 600.0;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        notes.push_back(std::string(ok ? "" : "FAILED ") + what);
    }
};

void report(int id, const std::string& title, const Outcome& o, bool& all_pass) {
    std::string detail;
    for (std::size_t i = 0; i < o.notes.size(); ++i) detail += (i ? "; " : "") + o.notes[i];
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << " " << title << ": " << detail << std::endl;
    all_pass = all_pass && o.pass;
}

TensorD rows_with_norm_at_least_one(std::size_t rows, std::size_t cols, Rng& rng) {
    for (;;) {
        TensorD t = random_tensor({rows, cols}, rng);
        bool ok = true;
        for (std::size_t r = 0; r < rows && ok; ++r) {
            double n = 0.0;
            for (std::size_t c = 0; c < cols; ++c) n += t(r, c) * t(r, c);
            ok = std::sqrt(n) >= 1.0;
        }
        if (ok) return t;
    }
}

// 1. Finite-difference gradient suite.

Outcome gradient_suite() {
    Outcome out;
    const auto t0 = Clock::now();
    constexpr int kCases = 100;

    using Builder = std::function<std::pair<LossBuilder, std::vector<TensorD>>(Rng&)>;
    const std::vector<std::pair<std::string, Builder>> losses = {
        {"info_nce",
         [](Rng& rng) {
             const std::size_t b = 1 + rng.below(4), d = 1 + rng.below(16);
             const double tau = 0.2 + rng.uniform();
             return std::make_pair(
                 LossBuilder([tau](Tape<double>& t, const std::vector<Var>& in) { return info_nce(t, in[0], in[1], tau); }),
                 std::vector<TensorD>{rows_with_norm_at_least_one(b, d, rng), rows_with_norm_at_least_one(b, d, rng)});
         }},
        {"mms_pair",
         [](Rng& rng) {
             const std::size_t b = 1 + rng.below(4), d = 1 + rng.below(16);
             const double margin = rng.uniform();
             return std::make_pair(
                 LossBuilder([margin](Tape<double>& t, const std::vector<Var>& in) {
                     return mms_pair(t, in[0], in[1], margin);
                 }),
                 std::vector<TensorD>{rows_with_norm_at_least_one(b, d, rng), rows_with_norm_at_least_one(b, d, rng)});
         }},
        {"mms_total",
         [](Rng& rng) {
             const std::size_t b = 1 + rng.below(4), d = 1 + rng.below(16);
             return std::make_pair(LossBuilder([](Tape<double>& t, const std::vector<Var>& in) {
                                       return mms_total(t, ModalityMap<Var>{in[0], in[1], in[2]}, 0.001);
                                   }),
                                   std::vector<TensorD>{rows_with_norm_at_least_one(b, d, rng),
                                                        rows_with_norm_at_least_one(b, d, rng),
                                                        rows_with_norm_at_least_one(b, d, rng)});
         }},
        {"recon_loss",
         [](Rng& rng) {
             const std::size_t b = 1 + rng.below(4);
             std::vector<TensorD> in;
             for (int m = 0; m < 3; ++m) {
                 const std::size_t d = 1 + rng.below(16);
                 in.push_back(random_tensor({b, d}, rng));
                 in.push_back(random_tensor({b, d}, rng));
             }
             return std::make_pair(LossBuilder([](Tape<double>& t, const std::vector<Var>& v) {
                                       return recon_loss(t, ModalityMap<Var>{v[0], v[2], v[4]},
                                                         ModalityMap<Var>{v[1], v[3], v[5]})
                                           .total;
                                   }),
                                   in);
         }},
        {"clustering_loss",
         [](Rng& rng) {
             const std::size_t b = 1 + rng.below(4), d = 1 + rng.below(16), k = 1 + rng.below(8);
             const TensorD c = random_tensor({k, d}, rng, 0.5);
             std::vector<std::size_t> assign(b);
             for (auto& a : assign) a = rng.below(k);
             const double margin = rng.uniform();
             return std::make_pair(LossBuilder([c, assign, margin](Tape<double>& t, const std::vector<Var>& in) {
                                       return clustering_loss(t, in[0], assign, c, margin);
                                   }),
                                   std::vector<TensorD>{random_tensor({b, d}, rng, 0.5)});
         }},
    };
    for (const auto& [name, make] : losses) {
        Rng rng(mix_seed(0xacce, name.size() * 131 + static_cast<std::uint64_t>(name[0])));
        double worst = 0.0;
        for (int i = 0; i < kCases; ++i) {
            auto [build, inputs] = make(rng);
            worst = std::max(worst, grad_check(build, inputs).max_rel_error);
        }
        out.require(worst <= kGradRelTol, name + " max rel err " + fmt(worst, 3));
    }

    using HeadFactory = std::function<BasicMlp<double>(std::size_t, std::size_t, std::size_t, Rng&)>;
    const std::vector<std::pair<std::string, HeadFactory>> heads = {
        {"representation head",
         [](std::size_t i, std::size_t h, std::size_t o, Rng& r) { return make_representation_head<double>("f", i, h, o, r); }},
        {"projection head",
         [](std::size_t i, std::size_t, std::size_t o, Rng& r) { return make_projection_head<double>("j", i, o, r); }},
        {"clustering head",
         [](std::size_t i, std::size_t, std::size_t o, Rng& r) { return make_clustering_head<double>("g", i, o, r); }},
        {"decoder", [](std::size_t i, std::size_t h, std::size_t o, Rng& r) { return make_decoder<double>("q", i, h, o, r); }},
        {"classifier",
         [](std::size_t i, std::size_t, std::size_t o, Rng& r) { return make_classifier<double>("c", i, o, r); }},
    };
    for (const auto& [name, make] : heads) {
        Rng rng(mix_seed(0x4ead, name.size() * 131 + static_cast<std::uint64_t>(name[0])));
        double worst = 0.0;
        for (int checked = 0; checked < kCases;) {
            const std::size_t in = 1 + rng.below(16), hidden = 1 + rng.below(16), o = 1 + rng.below(16);
            const std::size_t batch = 1 + rng.below(4);
            BasicMlp<double> mlp = make(in, hidden, o, rng);
            for (auto* p : mlp.parameters()) {
                for (auto& v : p->value.data()) v += 0.1 * rng.normal();
            }
            const TensorD x = random_tensor({batch, in}, rng);
            const TensorD target = random_tensor({batch, mlp.out_dim()}, rng);
            if (min_abs_preactivation(mlp, x) < 0.05) continue;
            worst = std::max(worst, grad_check_mlp(mlp, x, target).max_rel_error);
            ++checked;
        }
        out.require(worst <= kGradRelTol, name + " max rel err " + fmt(worst, 3));
    }
    const double secs = seconds_since(t0);
    out.require(secs < kGradBudgetSeconds, "runtime " + fmt(secs, 3) + " s");
    return out;
}

// 2. Loss oracles and closed forms.

Outcome loss_oracles() {
    Outcome out;
    Rng rng(0x04ac1e);
    double err_nce = 0.0, err_mms = 0.0, err_clu = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t b = 1 + rng.below(4), d = 1 + rng.below(8), k = 1 + rng.below(3);
        const TensorD p = random_tensor({b, d}, rng), q = random_tensor({b, d}, rng);
        const double tau = 0.05 + rng.uniform(), margin = rng.uniform();
        {
            Tape<double> t;
            err_nce = std::max(err_nce, std::abs(t.value(info_nce(t, t.constant(p), t.constant(q), tau)).item() -
                                                 oracle_info_nce(p, q, tau)));
        }
        {
            Tape<double> t;
            err_mms = std::max(err_mms, std::abs(t.value(mms_pair(t, t.constant(p), t.constant(q), margin)).item() -
                                                 oracle_mms_pair(p, q, margin)));
        }
        {
            const TensorD c = random_tensor({k, d}, rng);
            std::vector<std::size_t> assign(b);
            for (auto& a : assign) a = rng.below(k);
            Tape<double> t;
            err_clu = std::max(err_clu, std::abs(t.value(clustering_loss(t, t.constant(p), assign, c, margin)).item() -
                                                 oracle_clustering(p, assign, c, margin)));
        }
    }
    out.require(err_nce <= kOracleAbsTol, "info_nce vs brute force max abs err " + fmt(err_nce, 3));
    out.require(err_mms <= kOracleAbsTol, "mms_pair vs brute force max abs err " + fmt(err_mms, 3));
    out.require(err_clu <= kOracleAbsTol, "clustering_loss vs brute force max abs err " + fmt(err_clu, 3));

    // Closed forms, evaluated in the float training precision.
    bool singleton_zero = true, single_cluster_margin = true;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + rng.below(8);
        const Tensor p = random_tensor({1, d}, rng, 3.0).cast<float>();
        const Tensor q = random_tensor({1, d}, rng, 3.0).cast<float>();
        Tape<float> t;
        singleton_zero = singleton_zero && t.value(info_nce(t, t.constant(p), t.constant(q), 0.1)).item() == 0.0f;
        singleton_zero = singleton_zero && t.value(mms_pair(t, t.constant(p), t.constant(q), 0.3)).item() == 0.0f;
        const std::size_t b = 1 + rng.below(6);
        const Tensor r = random_tensor({b, d}, rng, 3.0).cast<float>();
        const Tensor c = random_tensor({1, d}, rng).cast<float>();
        const double margin = rng.uniform();
        const float v = t.value(clustering_loss(t, t.constant(r), std::vector<std::size_t>(b, 0), c, margin)).item();
        single_cluster_margin = single_cluster_margin && v == static_cast<float>(margin);
    }
    out.require(singleton_zero, "B=1 contrastive losses exactly 0");
    out.require(single_cluster_margin, "K=1 clustering loss exactly margin");
    return out;
}

// 3. K-means.

Outcome kmeans_checks() {
    Outcome out;
    Rng rng(0x4ea5);
    std::size_t violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 1 + rng.below(8);
        const std::size_t n = k + rng.below(64 - k + 1);
        const Tensor p = random_tensor({n, 1 + rng.below(8)}, rng, 1.0 + 4.0 * rng.uniform()).cast<float>();
        KMeansOptions opt;
        opt.k = k;
        opt.seed = rng.next_u64();
        double previous = std::numeric_limits<double>::infinity();
        opt.on_iteration = [&](std::size_t, double value) {
            if (value > previous) ++violations;
            previous = value;
        };
        kmeans_fit(p, opt);
    }
    out.require(violations == 0, "1000 fits, " + std::to_string(violations) + " inertia increases");

    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const double eps = 1e-3;
        Tensor p(Shape{20, 2});
        double mean[2][2] = {{0, 0}, {0, 0}};
        for (std::size_t i = 0; i < 20; ++i) {
            const std::size_t g = i % 2;
            for (std::size_t d = 0; d < 2; ++d) {
                p(i, d) = static_cast<float>(10.0 * g + eps * (2.0 * rng.uniform() - 1.0));
                mean[g][d] += p(i, d) / 10.0;
            }
        }
        KMeansOptions opt;
        opt.k = 2;
        opt.seed = rng.next_u64();
        const auto fit = kmeans_fit(p, opt);
        for (std::size_t g = 0; g < 2; ++g) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < 2; ++c) {
                best = std::min(best, std::max(std::abs(fit.centroids.centroids(c, 0) - mean[g][0]),
                                               std::abs(fit.centroids.centroids(c, 1) - mean[g][1])));
            }
            worst = std::max(worst, best);
        }
    }
    out.require(worst <= kGroupMeanTol, "two separated groups, max centroid error " + fmt(worst, 3));
    return out;
}

// Shared small setup for criteria 4 and 5.

const Dataset& small_dataset() {
    static const Dataset ds = [] {
        SynthConfig cfg;
        cfg.n_samples = 150;
        cfg.latent_dim = 4;
        cfg.modality_dims = {12, 10, 8};
        cfg.seed = 21;
        return synth_generate(cfg).dataset;
    }();
    return ds;
}

PretrainConfig small_config(Method method) {
    PretrainConfig cfg = PretrainConfig::for_method(method);
    cfg.epochs = 4;
    cfg.batch_size = 16;
    cfg.lr = 0.003;
    cfg.representation_dim = 12;
    cfg.hidden_dim = 16;
    cfg.projection_dim = 8;
    cfg.cluster_dim = 6;
    cfg.clusters = 4;
    cfg.cluster_start_epoch = 3;
    cfg.seed = 8;
    return cfg;
}

bool any_grad(const std::vector<Parameter*>& params) {
    for (const Parameter* p : params) {
        for (const float g : p->grad.data()) {
            if (g != 0.0f) return true;
        }
    }
    return false;
}

// 4. Composition and gradient routing.

Outcome composition() {
    Outcome out;
    const auto& train = small_dataset().split(Split::train);
    for (const Method m : {Method::con_clu_gen, Method::con_clu, Method::con_gen}) {
        Pretrainer trainer(small_config(m), small_dataset().info);
        trainer.run(train);
        bool exact = true;
        for (const LogRow& row : trainer.log()) {
            exact = exact && row.losses.total == multitask_loss(m, row.losses.components).total;
        }
        out.require(exact, std::string(to_string(m)) + " totals equal component sums bit-exactly over " +
                               std::to_string(trainer.log().size()) + " steps");
    }

    const auto hand = multitask_loss(Method::con_clu_gen, {{LossComponent::mms, 2.0f},
                                                           {LossComponent::clustering, 3.0f},
                                                           {LossComponent::reconstruction, 4.0f}});
    out.require(hand.total == 9.0f, "2 + 3 + 4 composes to " + fmt(hand.total));

    BatchOptions bo;
    bo.batch_size = 16;
    const Batch batch = make_batches(train, bo).front();
    bool routing_ok = true;
    std::string routing_detail;
    for (const Method m : kAllMethods) {
        PretrainConfig cfg = small_config(m);
        cfg.cluster_start_epoch = 1;
        Pretrainer trainer(cfg, small_dataset().info);
        trainer.step(batch, 1, 1, false);
        ModelBundle& model = trainer.model();
        const bool rep = any_grad(model.parameters(HeadGroup::representation));
        const bool proj = any_grad(model.parameters(HeadGroup::projection));
        const bool clu = any_grad(model.parameters(HeadGroup::clustering));
        const bool dec = any_grad(model.parameters(HeadGroup::decoder));
        const bool ok = rep && proj == uses_projection(m) && clu == uses_clustering(m) &&
                        dec == uses_reconstruction(m);
        bool video_only = true;
        if (m == Method::instance_cont) {
            for (const Modality other : {Modality::text, Modality::audio}) {
                video_only = video_only && !any_grad(model.representation(other).parameters()) &&
                             !any_grad(model.projection(other).parameters());
            }
        }
        routing_ok = routing_ok && ok && video_only;
        routing_detail += std::string(routing_detail.empty() ? "" : " ") + std::string(to_string(m)) +
                          (ok && video_only ? "=ok" : "=BAD");
    }
    out.require(routing_ok, "gradient routing " + routing_detail);
    return out;
}

std::uint64_t fnv1a_pretrained(ModelBundle& model) {
    std::uint64_t h = 1469598103934665603ull;
    for (const HeadGroup g :
         {HeadGroup::representation, HeadGroup::projection, HeadGroup::clustering, HeadGroup::decoder}) {
    for (const Parameter* p : model.parameters(g)) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data().data());
        for (std::size_t i = 0; i < p->value.size() * sizeof(float); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    }
    }
    return h;
}

// 5. Protocol gating.

Outcome gating() {
    Outcome out;
    const auto& train = small_dataset().split(Split::train);
    Pretrainer trainer(small_config(Method::con_clu_gen), small_dataset().info);
    trainer.run(train);
    double before = 0.0;
    std::size_t rows_before = 0, active_after = 0;
    for (const LogRow& row : trainer.log()) {
        const float c = row.losses.components.at(LossComponent::clustering);
        if (row.epoch < 3) {
            before += std::abs(c);
            ++rows_before;
        } else if (c != 0.0f) {
            ++active_after;
        }
    }
    out.require(before == 0.0 && rows_before > 0,
                "sum |clustering| over " + std::to_string(rows_before) + " steps before start epoch = " + fmt(before));
    out.require(active_after > 0, std::to_string(active_after) + " nonzero clustering steps after start");

    const Checkpoint ckpt = trainer.checkpoint();
    ModelBundle pretrained = ckpt.model();
    DownstreamConfig dc;
    dc.epochs = 5;
    auto result = attach_probe_and_train(ckpt, small_dataset(), dc);
    const std::uint64_t h0 = fnv1a_pretrained(pretrained), h1 = fnv1a_pretrained(result.model);
    out.require(h0 == h1, "linear-eval leaves every pretrained tensor unchanged");

    bool resume_ok = true;
    for (const Method m : kAllMethods) {
        const PretrainConfig cfg = small_config(m);
        Pretrainer full(cfg, small_dataset().info);
        full.run(train);
        Pretrainer part(cfg, small_dataset().info);
        part.run(train, 2);
        Pretrainer resumed = Pretrainer::resume(deserialize_checkpoint(serialize_checkpoint(part.checkpoint())));
        resumed.run(train);
        resume_ok = resume_ok && serialize_checkpoint(resumed.checkpoint()) == serialize_checkpoint(full.checkpoint());
    }
    out.require(resume_ok, "resume after epoch 2 matches uninterrupted run bit-exactly for all six methods");
    return out;
}

// 6. End-to-end ordering at desk scale.

Outcome ordering() {
    Outcome out;
    const auto t0 = Clock::now();
    const std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};

    // Every modality sees the shared class latent plus class cues of its own.
    SynthConfig sc;
    sc.n_samples = 1200;
    sc.n_classes = 4;
    sc.cross_modal_correlation = 0.9;
    sc.modality_dims = {32, 32, 32};
    sc.latent_dim = 16;
    sc.class_separation = 1.0;
    sc.private_dim = 8;
    sc.private_std = 1.0;
    sc.private_separation = 3.0;

    auto pretrain_cfg = [](Method m, std::uint64_t seed) {
        PretrainConfig cfg = PretrainConfig::for_method(m);
        cfg.epochs = 30;
        cfg.batch_size = 64;
        cfg.lr = 0.001;
        cfg.cluster_start_epoch = 10;
        cfg.representation_dim = 8;
        cfg.hidden_dim = 64;
        cfg.projection_dim = 32;
        cfg.cluster_dim = 16;
        cfg.seed = seed;
        return cfg;
    };

    double instance = 0, multi = 0, ccg = 0, ccg_low = 0, scratch_low = 0;
    for (const std::uint64_t seed : seeds) {
        sc.seed = seed;
        const Dataset ds = synth_generate(sc).dataset;
        const auto& train = ds.split(Split::train);
        DownstreamConfig dc;
        dc.seed = seed;

        auto probe = [&](Method m, FusionMode fusion) {
            Pretrainer trainer(pretrain_cfg(m, seed), ds.info);
            trainer.run(train);
            DownstreamConfig c = dc;
            c.fusion = fusion;
            const double full = attach_probe_and_train(trainer.model(), ds, c).report.weighted_accuracy;
            c.label_fraction = 0.1;
            const double low = attach_probe_and_train(trainer.model(), ds, c).report.weighted_accuracy;
            return std::make_pair(full, low);
        };
        // Instance-Cont trains only the video encoder, so it is probed on video alone.
        instance += probe(Method::instance_cont, FusionMode::vision_only).first;
        multi += probe(Method::multi_cont, FusionMode::concat).first;
        const auto [full, low] = probe(Method::con_clu_gen, FusionMode::concat);
        ccg += full;
        ccg_low += low;

        DownstreamConfig scratch = dc;
        scratch.mode = DownstreamMode::supervised_scratch;
        scratch.label_fraction = 0.1;
        Pretrainer untrained(pretrain_cfg(Method::con_clu_gen, seed), ds.info);
        scratch_low += attach_probe_and_train(untrained.model(), ds, scratch).report.weighted_accuracy;
    }
    const double n = static_cast<double>(seeds.size());
    instance /= n;
    multi /= n;
    ccg /= n;
    ccg_low /= n;
    scratch_low /= n;
    out.require(multi - instance > kOrderingGap,
                "Multi-Cont " + fmt(multi) + " vs Instance-Cont " + fmt(instance) + " (gap " + fmt(multi - instance) + ")");
    out.require(ccg - multi > kOrderingGap,
                "ConCluGen " + fmt(ccg) + " vs Multi-Cont " + fmt(multi) + " (gap " + fmt(ccg - multi) + ")");
    out.require(ccg_low > scratch_low, "10% labels: ConCluGen linear-eval " + fmt(ccg_low) + " vs supervised scratch " +
                                           fmt(scratch_low));
    const double secs = seconds_since(t0);
    out.require(secs < kOrderingBudgetSeconds, "5 seeds in " + fmt(secs, 3) + " s");
    return out;
}

// 7. Determinism of every CLI command.

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::string tree_bytes(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
    }
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) all += f.string() + '\0' + slurp(dir / f) + '\0';
    return all;
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "mmssl");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream sink;
    return run_cli(static_cast<int>(argv.size()), argv.data(), sink, sink);
}

Outcome determinism() {
    Outcome out;
    const fs::path root = fs::temp_directory_path() / "mmssl_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / "synth.json") << R"({"n_samples": 120, "latent_dim": 4,
        "modality_dims": {"video": 12, "text": 10, "audio": 8}, "seed": 3})";
    std::ofstream(root / "pretrain.json") << R"({"method": "ConCluGen", "epochs": 3, "batch_size": 16,
        "representation_dim": 12, "hidden_dim": 16, "projection_dim": 8, "cluster_dim": 6, "clusters": 4,
        "cluster_start_epoch": 2, "seed": 1})";

    std::array<std::string, 2> data, ckpt, log;
    std::array<std::array<std::string, 3>, 2> reports;
    std::array<std::string, 2> csv;
    bool codes_ok = true;
    for (int run = 0; run < 2; ++run) {
        const fs::path dir = root / ("run" + std::to_string(run));
        codes_ok &= cli({"synth", "--config", (root / "synth.json").string(), "--out", (dir / "data").string()}) == 0;
        codes_ok &= cli({"pretrain", "--config", (root / "pretrain.json").string(), "--data", (dir / "data").string(),
                         "--out", (dir / "model.mmck").string()}) == 0;
        const char* modes[] = {"linear", "finetune", "scratch"};
        for (int m = 0; m < 3; ++m) {
            const fs::path rep = dir / (std::string(modes[m]) + ".json");
            codes_ok &= cli({"evaluate", "--ckpt", (dir / "model.mmck").string(), "--data", (dir / "data").string(),
                             "--mode", modes[m], "--out", rep.string()}) == 0;
            reports[run][m] = slurp(rep);
        }
        codes_ok &= cli({"report", "--in", (dir / "linear.json").string(), "--confusion-csv",
                         (dir / "confusion.csv").string()}) == 0;
        data[run] = tree_bytes(dir / "data");
        ckpt[run] = slurp(dir / "model.mmck");
        log[run] = slurp(dir / "model.mmck.log.csv");
        csv[run] = slurp(dir / "confusion.csv") + slurp(dir / "confusion.per_class.csv");
    }
    out.require(codes_ok, "all commands exit 0");
    out.require(!data[0].empty() && data[0] == data[1], "synth output byte-identical");
    out.require(!ckpt[0].empty() && ckpt[0] == ckpt[1] && log[0] == log[1], "checkpoint and log byte-identical");
    out.require(!reports[0][0].empty() && reports[0] == reports[1], "linear/finetune/scratch reports byte-identical");
    out.require(!csv[0].empty() && csv[0] == csv[1], "report CSVs byte-identical");
    fs::remove_all(root);
    return out;
}

}  // namespace

int main() {
    bool all_pass = true;
    const auto guarded = [&](int id, const std::string& title, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        report(id, title, o, all_pass);
    };
    guarded(1, "gradient suite", gradient_suite);
    guarded(2, "loss oracles", loss_oracles);
    guarded(3, "k-means", kmeans_checks);
    guarded(4, "composition and routing", composition);
    guarded(5, "protocol gating", gating);
    guarded(6, "end-to-end ordering", ordering);
    guarded(7, "determinism", determinism);
    std::cout << (all_pass ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL") << std::endl;
    return all_pass ? 0 : 1;
}
