// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Model architecture: per-modality representation heads F (3 linear layers),
// per-modality projection heads J (2 layers), one clustering head G shared by
// all modalities, per-modality decoders Q mirroring F, and an optional linear
// classifier for downstream training. ReLU between layers, none after the last.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmssl/autograd.hpp"
#include "mmssl/method.hpp"
#include "mmssl/modality.hpp"
#include "mmssl/rng.hpp"

namespace mmssl {

template <typename T>
struct BasicLinear {
    BasicParameter<T> weight;  // [in x out]
    BasicParameter<T> bias;    // [out]
};

// Stack of linear layers with ReLU between consecutive layers.
template <typename T>
class BasicMlp {
public:
    BasicMlp() = default;

    // dims = {in, hidden..., out}. Weights ~ U(-b, b) with b = sqrt(6 / fan_in), zero bias.
    BasicMlp(const std::string& name, const std::vector<std::size_t>& dims, Rng& rng) {
        if (dims.size() < 2) throw ContractError("mlp '" + name + "': needs at least one layer");
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            const std::size_t in = dims[l], out = dims[l + 1];
            if (in == 0 || out == 0) throw ContractError("mlp '" + name + "': zero-sized layer");
            const double bound = std::sqrt(6.0 / static_cast<double>(in));
            BasicTensor<T> w(Shape{in, out});
            for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-bound, bound));
            const std::string prefix = name + ".layer" + std::to_string(l);
            layers_.push_back(BasicLinear<T>{BasicParameter<T>(prefix + ".weight", std::move(w)),
                                             BasicParameter<T>(prefix + ".bias", BasicTensor<T>(Shape{out}))});
        }
    }

    Var forward(Tape<T>& tape, Var x, bool trainable = true) {
        Var h = x;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            h = ops::linear(tape, h, tape.parameter(layers_[l].weight, trainable),
                            tape.parameter(layers_[l].bias, trainable));
            if (l + 1 < layers_.size()) h = ops::relu(tape, h);
        }
        return h;
    }

    // Inference without gradients.
    BasicTensor<T> apply(const BasicTensor<T>& x) {
        Tape<T> tape;
        const Var out = forward(tape, tape.constant(x), false);
        return tape.value(out);
    }

    std::size_t in_dim() const { return layers_.front().weight.value.rows(); }
    std::size_t out_dim() const { return layers_.back().weight.value.cols(); }
    std::size_t depth() const { return layers_.size(); }

    BasicLinear<T>& layer(std::size_t i) { return layers_.at(i); }
    const BasicLinear<T>& layer(std::size_t i) const { return layers_.at(i); }

    std::vector<BasicParameter<T>*> parameters() {
        std::vector<BasicParameter<T>*> out;
        for (auto& l : layers_) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
        return out;
    }
    std::vector<const BasicParameter<T>*> parameters() const {
        std::vector<const BasicParameter<T>*> out;
        for (const auto& l : layers_) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
        return out;
    }

private:
    std::vector<BasicLinear<T>> layers_;
};

using Mlp = BasicMlp<float>;

template <typename T>
BasicMlp<T> make_representation_head(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
                                     Rng& rng) {
    return BasicMlp<T>(name, {in, hidden, hidden, out}, rng);
}

template <typename T>
BasicMlp<T> make_projection_head(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    return BasicMlp<T>(name, {in, out, out}, rng);
}

template <typename T>
BasicMlp<T> make_clustering_head(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    return BasicMlp<T>(name, {in, out}, rng);
}

template <typename T>
BasicMlp<T> make_decoder(const std::string& name, std::size_t representation, std::size_t hidden, std::size_t out,
                         Rng& rng) {
    return BasicMlp<T>(name, {representation, hidden, hidden, out}, rng);
}

template <typename T>
BasicMlp<T> make_classifier(const std::string& name, std::size_t in, std::size_t n_classes, Rng& rng) {
    return BasicMlp<T>(name, {in, n_classes}, rng);
}

enum class FusionMode { concat, mean, vision_only };

std::string_view to_string(FusionMode f) noexcept;
std::optional<FusionMode> parse_fusion(std::string_view name) noexcept;

struct HeadsConfig {
    ModalityDims input_dims = {0, 0, 0};
    std::size_t representation_dim = 4096;
    std::size_t hidden_dim = 4096;
    std::size_t projection_dim = 512;
    std::size_t cluster_dim = 256;

    void validate() const;
};

void to_json(nlohmann::json& j, const HeadsConfig& cfg);
void from_json(const nlohmann::json& j, HeadsConfig& cfg);

using ModalityVars = ModalityMap<Var>;

// Which parameter groups a forward/backward touches.
enum class HeadGroup { representation, projection, clustering, decoder, classifier };

class ModelBundle {
public:
    ModelBundle(HeadsConfig config, Method method, std::uint64_t seed);

    const HeadsConfig& config() const noexcept { return config_; }
    Method method() const noexcept { return method_; }

    Mlp& representation(Modality m) { return representation_[index_of(m)]; }
    Mlp& projection(Modality m) { return projection_[index_of(m)]; }
    Mlp& decoder(Modality m) { return decoder_[index_of(m)]; }
    Mlp& clustering() { return clustering_; }
    bool has_classifier() const noexcept { return classifier_.has_value(); }
    Mlp& classifier();
    const Mlp& classifier() const;
    void attach_classifier(std::size_t in_dim, std::size_t n_classes, std::uint64_t seed);

    // Stable order: representation, projection, clustering, decoder, classifier.
    std::vector<Parameter*> parameters();
    std::vector<Parameter*> parameters(HeadGroup group);
    std::vector<const Parameter*> parameters() const;

    // D_m = F_m(x_m). Throws ContractError when a modality the method needs is absent.
    ModalityVars encode(Tape<float>& tape, const ModalityVars& inputs, bool trainable = true);
    // P_m = J_m(D_m)
    ModalityVars project(Tape<float>& tape, const ModalityVars& representations, bool trainable = true);
    // g_m = G(P_m) with the same G for every modality.
    ModalityVars cluster_embed(Tape<float>& tape, const ModalityVars& projections, bool trainable = true);
    // x_hat_m = Q_m(D_m)
    ModalityVars decode(Tape<float>& tape, const ModalityVars& representations, bool trainable = true);

    // Named tensors for checkpoints, including the classifier when attached.
    std::map<std::string, Tensor> export_tensors() const;
    // Replaces values of every parameter; throws CheckpointError on missing names or shapes.
    void import_tensors(const std::map<std::string, Tensor>& tensors);

private:
    HeadsConfig config_;
    Method method_;
    ModalityArray<Mlp> representation_;
    ModalityArray<Mlp> projection_;
    Mlp clustering_;
    ModalityArray<Mlp> decoder_;
    std::optional<Mlp> classifier_;
};

// Classifier input: concatenated D [B x 3*rep], elementwise mean [B x rep], or D_video.
Var fuse_for_classifier(Tape<float>& tape, const ModalityVars& representations, FusionMode mode);

std::size_t fused_dim(const HeadsConfig& cfg, FusionMode mode);

}  // namespace mmssl
