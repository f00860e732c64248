// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmssl/heads.hpp"

namespace mmssl {

using nlohmann::json;

std::string_view to_string(FusionMode f) noexcept {
    switch (f) {
        case FusionMode::concat: return "concat";
        case FusionMode::mean: return "mean";
        case FusionMode::vision_only: return "vision_only";
    }
    return "unknown";
}

std::optional<FusionMode> parse_fusion(std::string_view name) noexcept {
    for (const FusionMode f : {FusionMode::concat, FusionMode::mean, FusionMode::vision_only}) {
        if (to_string(f) == name) return f;
    }
    return std::nullopt;
}

void HeadsConfig::validate() const {
    for (const Modality m : kAllModalities) {
        if (input_dims[index_of(m)] == 0) {
            throw ConfigError("heads: input dim for " + std::string(to_string(m)) + " must be positive");
        }
    }
    if (representation_dim == 0 || hidden_dim == 0 || projection_dim == 0 || cluster_dim == 0) {
        throw ConfigError("heads: representation_dim, hidden_dim, projection_dim and cluster_dim must be positive");
    }
}

void to_json(json& j, const HeadsConfig& c) {
    j = json{{"input_dims", {{"video", c.input_dims[0]}, {"text", c.input_dims[1]}, {"audio", c.input_dims[2]}}},
             {"representation_dim", c.representation_dim},
             {"hidden_dim", c.hidden_dim},
             {"projection_dim", c.projection_dim},
             {"cluster_dim", c.cluster_dim}};
}

void from_json(const json& j, HeadsConfig& c) {
    for (const Modality m : kAllModalities) {
        c.input_dims[index_of(m)] = j.at("input_dims").at(std::string(to_string(m))).get<std::size_t>();
    }
    c.representation_dim = j.at("representation_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.projection_dim = j.at("projection_dim").get<std::size_t>();
    c.cluster_dim = j.at("cluster_dim").get<std::size_t>();
}

ModelBundle::ModelBundle(HeadsConfig config, Method method, std::uint64_t seed)
    : config_(std::move(config)), method_(method) {
    config_.validate();
    // Each head draws from its own stream so adding heads never shifts the others.
    std::uint64_t stream = 0;
    for (const Modality m : kAllModalities) {
        const std::string mod(to_string(m));
        Rng rep_rng(mix_seed(seed, stream++));
        representation_[index_of(m)] = make_representation_head<float>(
            "representation." + mod, config_.input_dims[index_of(m)], config_.hidden_dim, config_.representation_dim,
            rep_rng);
        Rng proj_rng(mix_seed(seed, stream++));
        projection_[index_of(m)] =
            make_projection_head<float>("projection." + mod, config_.representation_dim, config_.projection_dim, proj_rng);
        Rng dec_rng(mix_seed(seed, stream++));
        decoder_[index_of(m)] = make_decoder<float>("decoder." + mod, config_.representation_dim, config_.hidden_dim,
                                                    config_.input_dims[index_of(m)], dec_rng);
    }
    Rng clu_rng(mix_seed(seed, stream++));
    clustering_ = make_clustering_head<float>("clustering", config_.projection_dim, config_.cluster_dim, clu_rng);
}

Mlp& ModelBundle::classifier() {
    if (!classifier_) throw ContractError("model: no classifier attached");
    return *classifier_;
}

const Mlp& ModelBundle::classifier() const {
    if (!classifier_) throw ContractError("model: no classifier attached");
    return *classifier_;
}

void ModelBundle::attach_classifier(std::size_t in_dim, std::size_t n_classes, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0xc1a55));
    classifier_ = make_classifier<float>("classifier", in_dim, n_classes, rng);
}

std::vector<Parameter*> ModelBundle::parameters(HeadGroup group) {
    std::vector<Parameter*> out;
    auto append = [&out](Mlp& mlp) {
        for (auto* p : mlp.parameters()) out.push_back(p);
    };
    switch (group) {
        case HeadGroup::representation:
            for (auto& h : representation_) append(h);
            break;
        case HeadGroup::projection:
            for (auto& h : projection_) append(h);
            break;
        case HeadGroup::clustering: append(clustering_); break;
        case HeadGroup::decoder:
            for (auto& h : decoder_) append(h);
            break;
        case HeadGroup::classifier:
            if (classifier_) append(*classifier_);
            break;
    }
    return out;
}

std::vector<Parameter*> ModelBundle::parameters() {
    std::vector<Parameter*> out;
    for (const HeadGroup g : {HeadGroup::representation, HeadGroup::projection, HeadGroup::clustering,
                              HeadGroup::decoder, HeadGroup::classifier}) {
        const auto part = parameters(g);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

std::vector<const Parameter*> ModelBundle::parameters() const {
    auto mutable_params = const_cast<ModelBundle*>(this)->parameters();
    return {mutable_params.begin(), mutable_params.end()};
}

namespace {

void require_modalities(Method method, const ModalityVars& vars, const char* what) {
    if (!vars[index_of(Modality::video)]) {
        throw ContractError(std::string(what) + ": missing video modality");
    }
    if (needs_all_modalities(method)) {
        for (const Modality m : kAllModalities) {
            if (!vars[index_of(m)]) {
                throw ContractError(std::string(what) + ": method " + std::string(to_string(method)) + " needs the " +
                                    std::string(to_string(m)) + " modality");
            }
        }
    }
}

}  // namespace

ModalityVars ModelBundle::encode(Tape<float>& tape, const ModalityVars& inputs, bool trainable) {
    require_modalities(method_, inputs, "encode");
    ModalityVars out;
    for (const Modality m : kAllModalities) {
        const auto& x = inputs[index_of(m)];
        if (!x) continue;
        if (tape.value(*x).rank() != 2 || tape.value(*x).cols() != config_.input_dims[index_of(m)]) {
            throw DimensionError("encode: " + std::string(to_string(m)) + " input of shape " +
                                 shape_string(tape.value(*x).shape()) + ", head expects width " +
                                 std::to_string(config_.input_dims[index_of(m)]));
        }
        out[index_of(m)] = representation_[index_of(m)].forward(tape, *x, trainable);
    }
    return out;
}

ModalityVars ModelBundle::project(Tape<float>& tape, const ModalityVars& representations, bool trainable) {
    require_modalities(method_, representations, "project");
    ModalityVars out;
    for (const Modality m : kAllModalities) {
        if (const auto& d = representations[index_of(m)]) {
            out[index_of(m)] = projection_[index_of(m)].forward(tape, *d, trainable);
        }
    }
    return out;
}

ModalityVars ModelBundle::cluster_embed(Tape<float>& tape, const ModalityVars& projections, bool trainable) {
    ModalityVars out;
    for (const Modality m : kAllModalities) {
        if (const auto& p = projections[index_of(m)]) out[index_of(m)] = clustering_.forward(tape, *p, trainable);
    }
    return out;
}

ModalityVars ModelBundle::decode(Tape<float>& tape, const ModalityVars& representations, bool trainable) {
    ModalityVars out;
    for (const Modality m : kAllModalities) {
        if (const auto& d = representations[index_of(m)]) {
            out[index_of(m)] = decoder_[index_of(m)].forward(tape, *d, trainable);
        }
    }
    return out;
}

std::map<std::string, Tensor> ModelBundle::export_tensors() const {
    std::map<std::string, Tensor> out;
    for (const Parameter* p : parameters()) out.emplace(p->name, p->value);
    return out;
}

void ModelBundle::import_tensors(const std::map<std::string, Tensor>& tensors) {
    for (Parameter* p : parameters()) {
        const auto it = tensors.find(p->name);
        if (it == tensors.end()) throw CheckpointError("checkpoint: missing tensor '" + p->name + "'");
        if (it->second.shape() != p->value.shape()) {
            throw CheckpointError("checkpoint: tensor '" + p->name + "' has shape " + shape_string(it->second.shape()) +
                                  ", model expects " + shape_string(p->value.shape()));
        }
        p->value = it->second;
    }
}

Var fuse_for_classifier(Tape<float>& tape, const ModalityVars& representations, FusionMode mode) {
    const auto& video = representations[index_of(Modality::video)];
    if (mode == FusionMode::vision_only) {
        if (!video) throw ContractError("fuse_for_classifier: vision_only needs the video representation");
        return *video;
    }
    std::vector<Var> parts;
    for (const Modality m : kAllModalities) {
        const auto& d = representations[index_of(m)];
        if (!d) {
            throw ContractError("fuse_for_classifier: " + std::string(to_string(mode)) + " fusion needs the " +
                                std::string(to_string(m)) + " representation");
        }
        parts.push_back(*d);
    }
    if (mode == FusionMode::concat) return ops::concat_cols(tape, std::span<const Var>(parts));
    for (const Var p : parts) {
        if (tape.value(p).shape() != tape.value(parts[0]).shape()) {
            throw ContractError("fuse_for_classifier: mean fusion needs equal representation dims");
        }
    }
    return ops::mean_of(tape, std::span<const Var>(parts));
}

std::size_t fused_dim(const HeadsConfig& cfg, FusionMode mode) {
    return mode == FusionMode::concat ? kNumModalities * cfg.representation_dim : cfg.representation_dim;
}

}  // namespace mmssl
