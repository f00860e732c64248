// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic multi-modal dataset for desk-scale runs. Each sample picks a class
// (and one of the class's prototype modes), draws a shared latent around that
// prototype, and every modality sees a fixed random linear map of
//   [rho * shared_latent + (1 - rho) * modality_noise ; private]
// where the private factors belong to that modality alone: noise around an
// optional class-dependent offset that no other modality sees. Optional
// isotropic observation noise is added on top.

#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "mmssl/feature_store.hpp"

namespace mmssl {

struct SynthConfig {
    std::string name = "synthetic";
    std::size_t n_samples = 600;
    std::size_t n_classes = 4;
    std::size_t latent_dim = 8;
    ModalityDims modality_dims = {32, 24, 16};
    double cross_modal_correlation = 0.9;
    double label_noise = 0.0;
    bool multi_label = false;
    std::uint64_t seed = 0;

    // Shape of the latent class structure.
    std::size_t modes_per_class = 1;
    double class_separation = 3.0;
    double within_class_std = 1.0;
    double noise_std = 1.0;
    // Modality-private factors, independent across modalities. Their mean is a
    // per-(modality, class) prototype of length private_separation.
    std::size_t private_dim = 0;
    double private_std = 1.0;
    double private_separation = 0.0;
    // Isotropic noise added to every output coordinate.
    double observation_std = 0.0;
    // Probability that each non-primary class is also active (multi-label only).
    double extra_label_prob = 0.25;
    double train_fraction = 0.7;
    double val_fraction = 0.1;

    void validate() const;
};

void to_json(nlohmann::json& j, const SynthConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, SynthConfig& cfg);

struct SynthResult {
    Dataset dataset;
    // Latent-to-feature map per modality, [dim x (latent_dim + private_dim)] with
    // orthonormal columns; the first latent_dim columns carry the shared latent.
    ModalityArray<Tensor> modality_maps;
};

SynthResult synth_generate(const SynthConfig& cfg);

}  // namespace mmssl
