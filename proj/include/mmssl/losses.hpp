// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Self-supervised objectives, built from the differentiable ops in autograd.hpp.
//
//   info_nce        instance-level contrastive loss over two views, cosine similarity
//   mms_pair        masked margin softmax between two aligned modalities, both directions
//   mms_total       sum of mms_pair over (video,audio), (video,text), (audio,text)
//   recon_loss      per-modality MSE, summed
//   clustering_loss margin softmax of fused embeddings against fixed centroids
//   multitask_loss  unweighted sum of the components a method uses

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "json.hpp"
#include "mmssl/autograd.hpp"
#include "mmssl/method.hpp"
#include "mmssl/modality.hpp"

namespace mmssl {

struct LossConfig {
    double temperature = 0.1;
    double margin = 0.001;
    bool normalize_embeddings = true;
    Method method = Method::con_clu_gen;

    void validate() const;
};

void to_json(nlohmann::json& j, const LossConfig& cfg);
void from_json(const nlohmann::json& j, LossConfig& cfg);

enum class LossComponent { mms, clustering, reconstruction, info_nce };

std::string_view to_string(LossComponent c) noexcept;

struct LossBreakdown {
    float total = 0.0f;
    std::map<LossComponent, float> components;
};

// x' = mask * (x + eps), eps ~ N(0, noise_sigma^2), each coordinate zeroed with
// probability mask_prob. Fully determined by seed.
Tensor feature_augment(const Tensor& x, std::uint64_t seed, double noise_sigma, double mask_prob);

template <typename T>
Var info_nce(Tape<T>& tape, Var view, Var augmented_view, double temperature);

template <typename T>
Var mms_pair(Tape<T>& tape, Var a, Var b, double margin, bool normalize = true);

template <typename T>
Var mms_total(Tape<T>& tape, const ModalityMap<Var>& projections, double margin, bool normalize = true);

struct ReconTerms {
    Var total;
    ModalityMap<Var> parts;
};

template <typename T>
ReconTerms recon_loss(Tape<T>& tape, const ModalityMap<Var>& inputs, const ModalityMap<Var>& reconstructions);

// Mean over rows of -log( e^{R_i.C_a(i) - margin} / sum_k e^{R_i.C_k} ). Centroids
// are constants; gradients reach R only.
template <typename T>
Var clustering_loss(Tape<T>& tape, Var fused, std::span<const std::size_t> assignments,
                    const BasicTensor<T>& centroids, double margin);

struct LossTerms {
    Var total;
    std::map<LossComponent, Var> components;  // only those the method sums
};

// Components not used by the method are ignored; missing required ones throw
// ContractError naming the component.
template <typename T>
LossTerms multitask_loss(Tape<T>& tape, Method method, const std::map<LossComponent, Var>& components);

// Same rule over plain values.
LossBreakdown multitask_loss(Method method, const std::map<LossComponent, float>& components);

std::vector<LossComponent> required_components(Method method);

template <typename T>
LossBreakdown read_breakdown(const Tape<T>& tape, const LossTerms& terms);

}  // namespace mmssl
