// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmssl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mmssl {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

PretrainConfig PretrainConfig::for_method(Method method) {
    PretrainConfig cfg;
    cfg.method = method;
    cfg.loss.method = method;
    cfg.weight_decay = 0.00032;
    cfg.lr = (method == Method::con_clu_gen || method == Method::con_clu) ? 0.00009 : 0.00036;
    return cfg;
}

void PretrainConfig::validate() const {
    if (epochs == 0) throw ConfigError("pretrain: epochs must be positive");
    if (batch_size == 0) throw ConfigError("pretrain: batch_size must be positive");
    if (uses_projection(method) && batch_size < 2) {
        throw ConfigError("pretrain: batch_size must be >= 2 for contrastive methods");
    }
    if (!(lr > 0.0)) throw ConfigError("pretrain: lr must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("pretrain: weight_decay must be non-negative");
    if (!(min_lr >= 0.0) || min_lr > lr) throw ConfigError("pretrain: min_lr must lie in [0, lr]");
    if (period_mult == 0) throw ConfigError("pretrain: period_mult must be >= 1");
    loss.validate();
    if (clusters == 0) throw ConfigError("pretrain: clusters must be positive");
    if (queue_batches == 0) throw ConfigError("pretrain: queue_batches must be positive");
    if (cluster_start_epoch == 0) throw ConfigError("pretrain: cluster_start_epoch is 1-based");
    if (representation_dim == 0 || hidden_dim == 0 || projection_dim == 0 || cluster_dim == 0) {
        throw ConfigError("pretrain: head dims must be positive");
    }
    if (!(augment.noise_sigma >= 0.0)) throw ConfigError("pretrain: augment.noise_sigma must be non-negative");
    if (!(augment.mask_prob >= 0.0 && augment.mask_prob < 1.0)) {
        throw ConfigError("pretrain: augment.mask_prob must lie in [0, 1)");
    }
}

LrSchedule PretrainConfig::schedule(std::size_t steps_per_epoch) const {
    LrSchedule s;
    s.base_lr = lr;
    s.min_lr = min_lr;
    s.period0 = period0 != 0 ? period0 : std::max<std::uint64_t>(1, epochs * steps_per_epoch);
    s.period_mult = period_mult;
    return s;
}

void to_json(json& j, const PretrainConfig& c) {
    json loss;
    to_json(loss, c.loss);
    j = json{{"method", std::string(to_string(c.method))},
             {"epochs", c.epochs},
             {"batch_size", c.batch_size},
             {"lr", c.lr},
             {"weight_decay", c.weight_decay},
             {"min_lr", c.min_lr},
             {"period0", c.period0},
             {"period_mult", c.period_mult},
             {"loss", loss},
             {"clusters", c.clusters},
             {"queue_batches", c.queue_batches},
             {"cluster_start_epoch", c.cluster_start_epoch},
             {"kmeans_iters", c.kmeans_iters},
             {"kmeans_tol", c.kmeans_tol},
             {"representation_dim", c.representation_dim},
             {"hidden_dim", c.hidden_dim},
             {"projection_dim", c.projection_dim},
             {"cluster_dim", c.cluster_dim},
             {"augment", {{"noise_sigma", c.augment.noise_sigma}, {"mask_prob", c.augment.mask_prob}}},
             {"seed", c.seed}};
}

void from_json(const json& j, PretrainConfig& c) {
    if (!j.is_object()) throw ConfigError("pretrain config: expected a JSON object");
    static const std::set<std::string> known = {
        "method", "epochs", "batch_size", "lr", "weight_decay", "min_lr", "period0", "period_mult", "loss",
        "clusters", "queue_batches", "cluster_start_epoch", "kmeans_iters", "kmeans_tol", "representation_dim",
        "hidden_dim", "projection_dim", "cluster_dim", "augment", "seed"};
    for (const auto& [key, _] : j.items()) {
        if (known.count(key) == 0) throw ConfigError("pretrain config: unknown field '" + key + "'");
    }
    if (!j.contains("method") || !j.at("method").is_string()) {
        throw ConfigError("pretrain config: missing field 'method'");
    }
    const auto method = parse_method(j.at("method").get<std::string>());
    if (!method) throw ConfigError("pretrain config: unknown method '" + j.at("method").get<std::string>() + "'");
    c = PretrainConfig::for_method(*method);
    try {
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.lr = j.value("lr", c.lr);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.min_lr = j.value("min_lr", c.min_lr);
        c.period0 = j.value("period0", c.period0);
        c.period_mult = j.value("period_mult", c.period_mult);
        if (j.contains("loss")) {
            from_json(j.at("loss"), c.loss);
            if (!j.at("loss").contains("method")) c.loss.method = c.method;
        }
        c.clusters = j.value("clusters", c.clusters);
        c.queue_batches = j.value("queue_batches", c.queue_batches);
        c.cluster_start_epoch = j.value("cluster_start_epoch", c.cluster_start_epoch);
        c.kmeans_iters = j.value("kmeans_iters", c.kmeans_iters);
        c.kmeans_tol = j.value("kmeans_tol", c.kmeans_tol);
        c.representation_dim = j.value("representation_dim", c.representation_dim);
        c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
        c.projection_dim = j.value("projection_dim", c.projection_dim);
        c.cluster_dim = j.value("cluster_dim", c.cluster_dim);
        if (j.contains("augment")) {
            c.augment.noise_sigma = j.at("augment").value("noise_sigma", c.augment.noise_sigma);
            c.augment.mask_prob = j.at("augment").value("mask_prob", c.augment.mask_prob);
        }
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("pretrain config: ") + e.what());
    }
}

std::string_view to_string(DownstreamMode m) noexcept {
    switch (m) {
        case DownstreamMode::linear_eval: return "linear_eval";
        case DownstreamMode::finetune: return "finetune";
        case DownstreamMode::supervised_scratch: return "supervised_scratch";
    }
    return "unknown";
}

std::optional<DownstreamMode> parse_downstream_mode(std::string_view name) noexcept {
    for (const DownstreamMode m :
         {DownstreamMode::linear_eval, DownstreamMode::finetune, DownstreamMode::supervised_scratch}) {
        if (to_string(m) == name) return m;
    }
    return std::nullopt;
}

void DownstreamConfig::validate() const {
    if (task_type == TaskType::unlabeled) throw ConfigError("downstream: task_type must be labeled");
    if (epochs == 0 || batch_size == 0) throw ConfigError("downstream: epochs and batch_size must be positive");
    if (!(lr > 0.0)) throw ConfigError("downstream: lr must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("downstream: weight_decay must be non-negative");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("downstream: threshold must lie in (0, 1)");
    if (!(label_fraction > 0.0 && label_fraction <= 1.0)) {
        throw ConfigError("downstream: label_fraction must lie in (0, 1]");
    }
}

void to_json(json& j, const DownstreamConfig& c) {
    j = json{{"mode", std::string(to_string(c.mode))},
             {"task_type", std::string(to_string(c.task_type))},
             {"fusion", std::string(to_string(c.fusion))},
             {"epochs", c.epochs},
             {"batch_size", c.batch_size},
             {"lr", c.lr},
             {"weight_decay", c.weight_decay},
             {"threshold", c.threshold},
             {"label_fraction", c.label_fraction},
             {"seed", c.seed}};
}

void from_json(const json& j, DownstreamConfig& c) {
    if (!j.is_object()) throw ConfigError("downstream config: expected a JSON object");
    static const std::set<std::string> known = {"mode",  "task_type", "fusion",    "epochs",         "batch_size",
                                                "lr",    "weight_decay", "threshold", "label_fraction", "seed"};
    for (const auto& [key, _] : j.items()) {
        if (known.count(key) == 0) throw ConfigError("downstream config: unknown field '" + key + "'");
    }
    try {
        if (j.contains("mode")) {
            const auto m = parse_downstream_mode(j.at("mode").get<std::string>());
            if (!m) throw ConfigError("downstream config: unknown mode");
            c.mode = *m;
        }
        if (j.contains("task_type")) {
            const auto t = parse_task_type(j.at("task_type").get<std::string>());
            if (!t) throw ConfigError("downstream config: unknown task_type");
            c.task_type = *t;
        }
        if (j.contains("fusion")) {
            const auto f = parse_fusion(j.at("fusion").get<std::string>());
            if (!f) throw ConfigError("downstream config: unknown fusion");
            c.fusion = *f;
        }
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.lr = j.value("lr", c.lr);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.threshold = j.value("threshold", c.threshold);
        c.label_fraction = j.value("label_fraction", c.label_fraction);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("downstream config: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Run log

std::string log_csv(const std::vector<LogRow>& rows) {
    std::ostringstream os;
    os.precision(9);
    os << "epoch,step,lr,total,mms,clustering,reconstruction,info_nce\n";
    for (const LogRow& r : rows) {
        auto part = [&r](LossComponent c) {
            const auto it = r.losses.components.find(c);
            return it == r.losses.components.end() ? 0.0f : it->second;
        };
        os << r.epoch << ',' << r.step << ',' << r.lr << ',' << r.losses.total << ',' << part(LossComponent::mms)
           << ',' << part(LossComponent::clustering) << ',' << part(LossComponent::reconstruction) << ','
           << part(LossComponent::info_nce) << '\n';
    }
    return os.str();
}

void write_log_csv(const std::filesystem::path& path, const std::vector<LogRow>& rows) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write " + path.string());
    os << log_csv(rows);
}

// ---------------------------------------------------------------------------
// Pretraining

namespace {

HeadsConfig heads_from(const PretrainConfig& cfg, const DatasetInfo& info) {
    HeadsConfig heads;
    for (const Modality m : kAllModalities) {
        // Instance-Cont datasets may be video only; absent modalities still get heads for checkpoint symmetry.
        heads.input_dims[index_of(m)] = info.has(m) ? info.dim(m) : info.dim(Modality::video);
    }
    heads.representation_dim = cfg.representation_dim;
    heads.hidden_dim = cfg.hidden_dim;
    heads.projection_dim = cfg.projection_dim;
    heads.cluster_dim = cfg.cluster_dim;
    return heads;
}

void require_dataset_modalities(Method method, const DatasetInfo& info) {
    if (!info.has(Modality::video)) throw DataError("dataset '" + info.name + "' has no video modality");
    if (!needs_all_modalities(method)) return;
    for (const Modality m : kAllModalities) {
        if (!info.has(m)) {
            throw DataError("method " + std::string(to_string(method)) + " needs the " + std::string(to_string(m)) +
                            " modality, missing from dataset '" + info.name + "'");
        }
    }
}

void append(std::vector<Parameter*>& out, const std::vector<Parameter*>& more) {
    out.insert(out.end(), more.begin(), more.end());
}

}  // namespace

Pretrainer::Pretrainer(PretrainConfig cfg, const DatasetInfo& info)
    : cfg_(std::move(cfg)),
      info_(info),
      model_((cfg_.validate(), heads_from(cfg_, info)), cfg_.method, mix_seed(cfg_.seed, 1)),
      queue_(cfg_.queue_batches),
      rng_(mix_seed(cfg_.seed, 2)) {
    require_dataset_modalities(cfg_.method, info_);
}

bool Pretrainer::clustering_active(std::size_t epoch) const noexcept {
    return uses_clustering(cfg_.method) && epoch >= cfg_.cluster_start_epoch;
}

std::vector<Parameter*> Pretrainer::active_parameters(bool clustering_on) {
    std::vector<Parameter*> out;
    const Method method = cfg_.method;
    if (!needs_all_modalities(method)) {
        append(out, model_.representation(Modality::video).parameters());
        append(out, model_.projection(Modality::video).parameters());
        return out;
    }
    append(out, model_.parameters(HeadGroup::representation));
    if (uses_projection(method)) append(out, model_.parameters(HeadGroup::projection));
    if (clustering_on) append(out, model_.parameters(HeadGroup::clustering));
    if (uses_reconstruction(method)) append(out, model_.parameters(HeadGroup::decoder));
    return out;
}

LogRow Pretrainer::step(const Batch& batch, std::size_t epoch, std::size_t steps_per_epoch, bool apply_update) {
    const Method method = cfg_.method;
    const LossConfig& lc = cfg_.loss;
    const bool clustering_on = clustering_active(epoch);
    Tape<float> tape;
    std::map<LossComponent, Var> components;

    if (method == Method::instance_cont) {
        const Tensor& video = *batch.features[index_of(Modality::video)];
        const std::uint64_t seed_a = rng_.next_u64();
        const std::uint64_t seed_b = rng_.next_u64();
        ModalityVars view_a, view_b;
        view_a[index_of(Modality::video)] =
            tape.constant(feature_augment(video, seed_a, cfg_.augment.noise_sigma, cfg_.augment.mask_prob));
        view_b[index_of(Modality::video)] =
            tape.constant(feature_augment(video, seed_b, cfg_.augment.noise_sigma, cfg_.augment.mask_prob));
        const auto pa = model_.project(tape, model_.encode(tape, view_a));
        const auto pb = model_.project(tape, model_.encode(tape, view_b));
        components[LossComponent::info_nce] =
            info_nce(tape, *pa[index_of(Modality::video)], *pb[index_of(Modality::video)], lc.temperature);
    } else {
        ModalityVars inputs;
        for (const Modality m : kAllModalities) {
            if (!batch.features[index_of(m)]) {
                throw DataError("batch lacks the " + std::string(to_string(m)) + " modality");
            }
            inputs[index_of(m)] = tape.constant(*batch.features[index_of(m)]);
        }
        const ModalityVars reps = model_.encode(tape, inputs);
        ModalityVars projections;
        if (uses_mms(method)) {
            projections = model_.project(tape, reps);
            components[LossComponent::mms] = mms_total(tape, projections, lc.margin, lc.normalize_embeddings);
        }
        if (uses_reconstruction(method)) {
            const ModalityVars recon = model_.decode(tape, reps);
            components[LossComponent::reconstruction] = recon_loss(tape, inputs, recon).total;
        }
        if (uses_clustering(method)) {
            std::optional<Var> clu;
            if (clustering_on) {
                ModalityVars g = model_.cluster_embed(tape, projections);
                if (lc.normalize_embeddings) {
                    for (auto& gm : g) gm = ops::l2_normalize_rows(tape, *gm);
                }
                const Var fused = fuse_multimodal(tape, *g[index_of(Modality::video)], *g[index_of(Modality::text)],
                                                  *g[index_of(Modality::audio)]);
                queue_.push(tape.value(fused));
                const Tensor points = queue_.snapshot();
                if (points.rows() >= cfg_.clusters) {
                    KMeansOptions opts;
                    opts.k = cfg_.clusters;
                    opts.max_iters = cfg_.kmeans_iters;
                    opts.tol = cfg_.kmeans_tol;
                    opts.seed = rng_.next_u64();
                    opts.warm_start = centroids_;
                    centroids_ = kmeans_fit(points, opts).centroids;
                    const auto labels = assign(tape.value(fused), centroids_->centroids);
                    clu = clustering_loss(tape, fused, labels, centroids_->centroids, lc.margin);
                }
            }
            components[LossComponent::clustering] = clu ? *clu : tape.constant(Tensor::scalar(0.0f));
        }
    }

    const LossTerms terms = multitask_loss(tape, method, components);
    LogRow row;
    row.epoch = epoch;
    row.step = global_step_;
    row.losses = read_breakdown(tape, terms);
    for (const auto& [c, v] : row.losses.components) {
        if (!std::isfinite(v)) {
            throw NonFiniteLossError(std::string(to_string(c)),
                                     "value " + std::to_string(v) + " at epoch " + std::to_string(epoch) + ", step " +
                                         std::to_string(global_step_));
        }
    }
    if (!std::isfinite(row.losses.total)) throw NonFiniteLossError("total", "non-finite total");

    const LrSchedule schedule = cfg_.schedule(steps_per_epoch);
    row.lr = lr_at(schedule, global_step_);
    auto params = model_.parameters();
    zero_grads(std::span<Parameter* const>(params));
    tape.backward(terms.total);
    if (apply_update) {
        AdamWOptions opt;
        opt.lr = row.lr;
        opt.weight_decay = cfg_.weight_decay;
        for (Parameter* p : active_parameters(clustering_on)) adamw_step(*p, opt);
        ++global_step_;
    }
    return row;
}

void Pretrainer::train_epoch(std::span<const SampleRecord> train) {
    const std::size_t epoch = epochs_done_ + 1;
    BatchOptions opts;
    opts.batch_size = cfg_.batch_size;
    opts.seed = cfg_.seed;
    opts.epoch = epoch;
    opts.drop_last = true;
    opts.contrastive = uses_projection(cfg_.method);
    const auto batches = make_batches(train, opts);
    if (batches.empty()) {
        throw ConfigError("pretrain: training split of " + std::to_string(train.size()) +
                          " samples yields no full batch of " + std::to_string(cfg_.batch_size));
    }
    for (const Batch& batch : batches) log_.push_back(step(batch, epoch, batches.size()));
    epochs_done_ = epoch;
}

void Pretrainer::run(std::span<const SampleRecord> train, std::optional<std::size_t> until_epoch) {
    const std::size_t target = until_epoch.value_or(cfg_.epochs);
    while (epochs_done_ < target) train_epoch(train);
}

Checkpoint Pretrainer::checkpoint() const {
    Checkpoint ckpt;
    store_model(ckpt, model_);
    json pre;
    to_json(pre, cfg_);
    ckpt.config["pretrain"] = pre;
    json dims = json::object();
    for (const Modality m : kAllModalities) {
        if (info_.has(m)) dims[std::string(to_string(m))] = info_.dim(m);
    }
    ckpt.config["dataset"] = {{"name", info_.name}, {"modality_dims", dims}};

    json steps = json::object();
    for (const Parameter* p : model_.parameters()) {
        ckpt.tensors[p->name + "#moment1"] = p->moment1;
        ckpt.tensors[p->name + "#moment2"] = p->moment2;
        steps[p->name] = p->step_count;
    }
    if (centroids_) {
        ckpt.tensors["centroids"] = centroids_->centroids;
        ckpt.state["centroid_inertia"] = centroids_->inertia;
    }
    const auto& queue = queue_.contents();
    for (std::size_t i = 0; i < queue.size(); ++i) ckpt.tensors["queue." + std::to_string(i)] = queue[i];
    ckpt.state["queue_batches"] = queue.size();
    ckpt.state["epoch"] = epochs_done_;
    ckpt.state["global_step"] = global_step_;
    ckpt.state["rng_state"] = rng_.state();
    ckpt.state["step_counts"] = steps;
    return ckpt;
}

Pretrainer Pretrainer::resume(const Checkpoint& ckpt) {
    if (!ckpt.config.contains("pretrain")) throw CheckpointError("checkpoint: missing field 'config.pretrain'");
    PretrainConfig cfg;
    from_json(ckpt.config.at("pretrain"), cfg);
    if (cfg.method != ckpt.method) throw CheckpointError("checkpoint: method tag disagrees with config");
    DatasetInfo info;
    try {
        const json& ds = ckpt.config.at("dataset");
        info.name = ds.at("name").get<std::string>();
        for (const auto& [key, value] : ds.at("modality_dims").items()) {
            const auto m = parse_modality(key);
            if (!m) throw CheckpointError("checkpoint: unknown modality '" + key + "'");
            info.modality_dims[index_of(*m)] = value.get<std::size_t>();
        }
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("checkpoint: malformed 'config.dataset': ") + e.what());
    }

    Pretrainer trainer(cfg, info);
    trainer.model_.import_tensors(ckpt.tensors);
    try {
        const json& steps = ckpt.state.at("step_counts");
        for (Parameter* p : trainer.model_.parameters()) {
            const auto m1 = ckpt.tensors.find(p->name + "#moment1");
            const auto m2 = ckpt.tensors.find(p->name + "#moment2");
            if (m1 == ckpt.tensors.end() || m2 == ckpt.tensors.end()) {
                throw CheckpointError("checkpoint: missing optimizer state for '" + p->name + "'");
            }
            if (m1->second.shape() != p->value.shape() || m2->second.shape() != p->value.shape()) {
                throw CheckpointError("checkpoint: optimizer state shape mismatch for '" + p->name + "'");
            }
            p->moment1 = m1->second;
            p->moment2 = m2->second;
            p->step_count = steps.at(p->name).get<std::uint64_t>();
        }
        const auto c = ckpt.tensors.find("centroids");
        if (c != ckpt.tensors.end()) {
            trainer.centroids_ = CentroidSet{c->second, ckpt.state.at("centroid_inertia").get<double>()};
        }
        const auto queued = ckpt.state.at("queue_batches").get<std::size_t>();
        for (std::size_t i = 0; i < queued; ++i) {
            const auto q = ckpt.tensors.find("queue." + std::to_string(i));
            if (q == ckpt.tensors.end()) throw CheckpointError("checkpoint: missing queue batch " + std::to_string(i));
            trainer.queue_.push(q->second);
        }
        trainer.epochs_done_ = ckpt.state.at("epoch").get<std::size_t>();
        trainer.global_step_ = ckpt.state.at("global_step").get<std::uint64_t>();
        trainer.rng_.set_state(ckpt.state.at("rng_state").get<std::string>());
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("checkpoint: malformed training state: ") + e.what());
    }
    return trainer;
}

PretrainResult pretrain(const PretrainConfig& cfg, const Dataset& dataset) {
    Pretrainer trainer(cfg, dataset.info);
    trainer.run(dataset.split(Split::train));
    return PretrainResult{trainer.checkpoint(), trainer.log()};
}

// ---------------------------------------------------------------------------
// Downstream

namespace {

std::vector<Modality> fusion_modalities(FusionMode fusion) {
    if (fusion == FusionMode::vision_only) return {Modality::video};
    return {kAllModalities.begin(), kAllModalities.end()};
}

ModalityVars constant_inputs(Tape<float>& tape, const Batch& batch, FusionMode fusion) {
    ModalityVars inputs;
    for (const Modality m : fusion_modalities(fusion)) {
        if (!batch.features[index_of(m)]) {
            throw DataError("downstream: " + std::string(to_string(fusion)) + " fusion needs the " +
                            std::string(to_string(m)) + " modality");
        }
        inputs[index_of(m)] = tape.constant(*batch.features[index_of(m)]);
    }
    return inputs;
}

ModalityVars represent(Tape<float>& tape, ModelBundle& model, const ModalityVars& inputs, bool trainable) {
    ModalityVars reps;
    for (const Modality m : kAllModalities) {
        if (inputs[index_of(m)]) {
            reps[index_of(m)] = model.representation(m).forward(tape, *inputs[index_of(m)], trainable);
        }
    }
    return reps;
}

void check_labels(std::span<const SampleRecord> records, const DownstreamConfig& cfg, std::size_t n_classes,
                  const char* split) {
    for (const SampleRecord& r : records) {
        const bool ok = cfg.task_type == TaskType::single_label
                            ? std::holds_alternative<std::size_t>(r.label) && std::get<std::size_t>(r.label) < n_classes
                            : std::holds_alternative<MultiLabel>(r.label) &&
                                  std::get<MultiLabel>(r.label).size() == n_classes;
        if (!ok) {
            throw DataError("downstream: sample '" + r.sample_id + "' in " + split + " split has no " +
                            std::string(to_string(cfg.task_type)) + " label");
        }
    }
}

Var classification_loss(Tape<float>& tape, Var logits, const std::vector<Label>& labels, TaskType task) {
    const std::size_t n_classes = tape.value(logits).cols();
    if (task == TaskType::single_label) {
        std::vector<std::size_t> targets;
        targets.reserve(labels.size());
        for (const Label& l : labels) targets.push_back(std::get<std::size_t>(l));
        return ops::margin_cross_entropy(tape, logits, targets, 0.0);
    }
    Tensor targets(Shape{labels.size(), n_classes});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& bits = std::get<MultiLabel>(labels[i]);
        for (std::size_t c = 0; c < n_classes; ++c) targets(i, c) = bits[c] != 0 ? 1.0f : 0.0f;
    }
    return ops::sigmoid_bce(tape, logits, targets);
}

MetricsReport evaluate_logits(const Tensor& logits, std::span<const SampleRecord> records, const DatasetInfo& info,
                              const DownstreamConfig& cfg) {
    if (cfg.task_type == TaskType::single_label) {
        std::vector<std::size_t> preds(records.size()), labels(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto row = logits.row(i);
            preds[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
            labels[i] = std::get<std::size_t>(records[i].label);
        }
        return weighted_metrics_single(preds, labels, info.n_classes(), info.class_names);
    }
    Tensor scores(logits.shape());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        scores[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(logits[i]))));
    }
    std::vector<MultiLabel> labels;
    for (const SampleRecord& r : records) labels.push_back(std::get<MultiLabel>(r.label));
    return weighted_metrics_multilabel(scores, labels, cfg.threshold, info.class_names);
}

}  // namespace

Tensor predict_logits(ModelBundle& model, std::span<const SampleRecord> records, FusionMode fusion) {
    std::vector<std::size_t> all(records.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const Batch batch = gather_batch(records, all);
    Tape<float> tape;
    const ModalityVars reps = represent(tape, model, constant_inputs(tape, batch, fusion), false);
    const Var fused = fuse_for_classifier(tape, reps, fusion);
    return tape.value(model.classifier().forward(tape, fused, false));
}

DownstreamResult attach_probe_and_train(const ModelBundle& pretrained, const Dataset& dataset,
                                        const DownstreamConfig& cfg) {
    cfg.validate();
    const DatasetInfo& info = dataset.info;
    if (info.task_type != cfg.task_type) {
        throw DataError("downstream: dataset '" + info.name + "' is " + std::string(to_string(info.task_type)) +
                        " but the config asks for " + std::string(to_string(cfg.task_type)));
    }
    const auto& full_train = dataset.split(Split::train);
    const auto& test = dataset.split(Split::test);
    check_labels(full_train, cfg, info.n_classes(), "train");
    check_labels(test, cfg, info.n_classes(), "test");
    if (full_train.empty() || test.empty()) throw DataError("downstream: train and test splits must be non-empty");

    std::vector<SampleRecord> train;
    {
        const auto order = epoch_permutation(full_train.size(), mix_seed(cfg.seed, 0x1abe1), 0);
        const auto keep = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(cfg.label_fraction * static_cast<double>(full_train.size()))));
        std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
        std::sort(chosen.begin(), chosen.end());
        for (const std::size_t i : chosen) train.push_back(full_train[i]);
    }

    DownstreamResult result{cfg.mode == DownstreamMode::supervised_scratch
                                ? ModelBundle(pretrained.config(), pretrained.method(), mix_seed(cfg.seed, 3))
                                : pretrained,
                            MetricsReport{},
                            {}};
    ModelBundle& model = result.model;
    model.attach_classifier(fused_dim(model.config(), cfg.fusion), info.n_classes(), cfg.seed);
    const bool frozen = cfg.mode == DownstreamMode::linear_eval;

    std::vector<Parameter*> trainable = model.classifier().parameters();
    if (!frozen) {
        for (const Modality m : fusion_modalities(cfg.fusion)) {
            const auto ps = model.representation(m).parameters();
            trainable.insert(trainable.end(), ps.begin(), ps.end());
        }
    }

    // Frozen encoders: compute the classifier inputs once.
    std::optional<Tensor> cached_features;
    if (frozen) {
        std::vector<std::size_t> all(train.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        const Batch everything = gather_batch(train, all);
        Tape<float> tape;
        const ModalityVars reps = represent(tape, model, constant_inputs(tape, everything, cfg.fusion), false);
        cached_features = tape.value(fuse_for_classifier(tape, reps, cfg.fusion));
    }

    const std::size_t steps_per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
    LrSchedule schedule;
    schedule.base_lr = cfg.lr;
    schedule.min_lr = 0.0;
    schedule.period0 = std::max<std::uint64_t>(1, cfg.epochs * steps_per_epoch);
    AdamWOptions opt;
    opt.weight_decay = cfg.weight_decay;

    std::uint64_t step = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        BatchOptions bo;
        bo.batch_size = cfg.batch_size;
        bo.seed = mix_seed(cfg.seed, 4);
        bo.epoch = epoch;
        bo.drop_last = false;
        double epoch_loss = 0.0;
        const auto batches = make_batches(train, bo);
        for (const Batch& batch : batches) {
            Tape<float> tape;
            Var fused;
            if (frozen) {
                Tensor rows(Shape{batch.size(), cached_features->cols()});
                for (std::size_t r = 0; r < batch.size(); ++r) {
                    const auto src = cached_features->row(batch.indices[r]);
                    std::copy(src.begin(), src.end(), rows.row(r).begin());
                }
                fused = tape.constant(std::move(rows));
            } else {
                const ModalityVars reps = represent(tape, model, constant_inputs(tape, batch, cfg.fusion), true);
                fused = fuse_for_classifier(tape, reps, cfg.fusion);
            }
            const Var logits = model.classifier().forward(tape, fused, true);
            const Var loss = classification_loss(tape, logits, batch.labels, cfg.task_type);
            epoch_loss += tape.value(loss).item();
            zero_grads(std::span<Parameter* const>(trainable));
            tape.backward(loss);
            opt.lr = lr_at(schedule, step++);
            for (Parameter* p : trainable) adamw_step(*p, opt);
        }
        result.epoch_losses.push_back(epoch_loss / static_cast<double>(batches.size()));
    }

    const Tensor logits = predict_logits(model, test, cfg.fusion);
    result.report = evaluate_logits(logits, test, info, cfg);
    return result;
}

DownstreamResult attach_probe_and_train(const Checkpoint& ckpt, const Dataset& dataset, const DownstreamConfig& cfg) {
    return attach_probe_and_train(ckpt.model(), dataset, cfg);
}

}  // namespace mmssl
