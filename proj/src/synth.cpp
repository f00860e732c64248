// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmssl/synth.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "mmssl/rng.hpp"

namespace mmssl {

using nlohmann::json;

void SynthConfig::validate() const {
    if (n_samples == 0) throw ConfigError("synth: n_samples must be positive");
    if (n_classes == 0) throw ConfigError("synth: n_classes must be positive");
    if (latent_dim == 0) throw ConfigError("synth: latent_dim must be positive");
    if (modes_per_class == 0) throw ConfigError("synth: modes_per_class must be positive");
    for (const Modality m : kAllModalities) {
        const std::size_t d = modality_dims[index_of(m)];
        if (d == 0) throw ConfigError("synth: modality_dims." + std::string(to_string(m)) + " must be positive");
        if (d < latent_dim + private_dim) {
            throw ConfigError("synth: modality_dims." + std::string(to_string(m)) +
                              " must be >= latent_dim + private_dim");
        }
    }
    if (!(cross_modal_correlation >= 0.0 && cross_modal_correlation <= 1.0)) {
        throw ConfigError("synth: cross_modal_correlation must lie in [0, 1]");
    }
    if (!(label_noise >= 0.0 && label_noise <= 1.0)) throw ConfigError("synth: label_noise must lie in [0, 1]");
    if (!(extra_label_prob >= 0.0 && extra_label_prob <= 1.0)) {
        throw ConfigError("synth: extra_label_prob must lie in [0, 1]");
    }
    if (!(class_separation >= 0.0) || !(within_class_std >= 0.0) || !(noise_std >= 0.0) || !(private_std >= 0.0) ||
        !(private_separation >= 0.0) || !(observation_std >= 0.0)) {
        throw ConfigError("synth: separations and standard deviations must be non-negative");
    }
    if (!(train_fraction > 0.0) || !(val_fraction >= 0.0) || train_fraction + val_fraction > 1.0) {
        throw ConfigError("synth: split fractions must satisfy 0 < train, 0 <= val, train + val <= 1");
    }
}

void to_json(json& j, const SynthConfig& c) {
    j = json{{"name", c.name},
             {"n_samples", c.n_samples},
             {"n_classes", c.n_classes},
             {"latent_dim", c.latent_dim},
             {"modality_dims", {{"video", c.modality_dims[0]}, {"text", c.modality_dims[1]}, {"audio", c.modality_dims[2]}}},
             {"cross_modal_correlation", c.cross_modal_correlation},
             {"label_noise", c.label_noise},
             {"multi_label", c.multi_label},
             {"seed", c.seed},
             {"modes_per_class", c.modes_per_class},
             {"class_separation", c.class_separation},
             {"within_class_std", c.within_class_std},
             {"noise_std", c.noise_std},
             {"private_dim", c.private_dim},
             {"private_std", c.private_std},
             {"private_separation", c.private_separation},
             {"observation_std", c.observation_std},
             {"extra_label_prob", c.extra_label_prob},
             {"train_fraction", c.train_fraction},
             {"val_fraction", c.val_fraction}};
}

void from_json(const json& j, SynthConfig& c) {
    if (!j.is_object()) throw ConfigError("synth config: expected a JSON object");
    static const std::set<std::string> known = {
        "name", "n_samples", "n_classes", "latent_dim", "modality_dims", "cross_modal_correlation", "label_noise",
        "multi_label", "seed", "modes_per_class", "class_separation", "within_class_std", "noise_std",
        "private_dim", "private_std", "private_separation", "observation_std",
        "extra_label_prob", "train_fraction", "val_fraction"};
    for (const auto& [key, _] : j.items()) {
        if (known.count(key) == 0) throw ConfigError("synth config: unknown field '" + key + "'");
    }
    try {
        c.name = j.value("name", c.name);
        c.n_samples = j.value("n_samples", c.n_samples);
        c.n_classes = j.value("n_classes", c.n_classes);
        c.latent_dim = j.value("latent_dim", c.latent_dim);
        if (j.contains("modality_dims")) {
            for (const auto& [key, value] : j.at("modality_dims").items()) {
                const auto m = parse_modality(key);
                if (!m) throw ConfigError("synth config: unknown modality '" + key + "' in modality_dims");
                c.modality_dims[index_of(*m)] = value.get<std::size_t>();
            }
        }
        c.cross_modal_correlation = j.value("cross_modal_correlation", c.cross_modal_correlation);
        c.label_noise = j.value("label_noise", c.label_noise);
        c.multi_label = j.value("multi_label", c.multi_label);
        c.seed = j.value("seed", c.seed);
        c.modes_per_class = j.value("modes_per_class", c.modes_per_class);
        c.class_separation = j.value("class_separation", c.class_separation);
        c.within_class_std = j.value("within_class_std", c.within_class_std);
        c.noise_std = j.value("noise_std", c.noise_std);
        c.private_dim = j.value("private_dim", c.private_dim);
        c.private_std = j.value("private_std", c.private_std);
        c.private_separation = j.value("private_separation", c.private_separation);
        c.observation_std = j.value("observation_std", c.observation_std);
        c.extra_label_prob = j.value("extra_label_prob", c.extra_label_prob);
        c.train_fraction = j.value("train_fraction", c.train_fraction);
        c.val_fraction = j.value("val_fraction", c.val_fraction);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth config: ") + e.what());
    }
}

namespace {

// Gaussian matrix orthonormalized column by column (modified Gram-Schmidt).
Tensor orthonormal_map(std::size_t rows, std::size_t cols, Rng& rng) {
    std::vector<std::vector<double>> columns(cols, std::vector<double>(rows));
    for (std::size_t c = 0; c < cols; ++c) {
        auto& v = columns[c];
        for (;;) {
            for (auto& x : v) x = rng.normal();
            for (std::size_t p = 0; p < c; ++p) {
                double dot = 0.0;
                for (std::size_t r = 0; r < rows; ++r) dot += v[r] * columns[p][r];
                for (std::size_t r = 0; r < rows; ++r) v[r] -= dot * columns[p][r];
            }
            double norm = 0.0;
            for (const double x : v) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 1e-6) {
                for (auto& x : v) x /= norm;
                break;
            }
        }
    }
    Tensor map(Shape{rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) map(r, c) = static_cast<float>(columns[c][r]);
    }
    return map;
}

std::vector<double> random_direction(std::size_t dim, double length, Rng& rng) {
    std::vector<double> v(dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            norm += x * x;
        }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (auto& x : v) x *= length / norm;
    return v;
}

}  // namespace

SynthResult synth_generate(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const std::size_t latent = cfg.latent_dim;

    SynthResult result;
    for (const Modality m : kAllModalities) {
        result.modality_maps[index_of(m)] = orthonormal_map(cfg.modality_dims[index_of(m)], latent + cfg.private_dim, rng);
    }
    // prototypes[c * modes + mode]
    std::vector<std::vector<double>> prototypes;
    for (std::size_t p = 0; p < cfg.n_classes * cfg.modes_per_class; ++p) {
        prototypes.push_back(random_direction(latent, cfg.class_separation, rng));
    }
    // private_prototypes[m][c]
    ModalityArray<std::vector<std::vector<double>>> private_prototypes;
    if (cfg.private_dim > 0) {
        for (const Modality m : kAllModalities) {
            for (std::size_t c = 0; c < cfg.n_classes; ++c) {
                private_prototypes[index_of(m)].push_back(
                    random_direction(cfg.private_dim, cfg.private_separation, rng));
            }
        }
    }

    Dataset& ds = result.dataset;
    ds.info.name = cfg.name;
    ds.info.task_type = cfg.multi_label ? TaskType::multi_label : TaskType::single_label;
    for (std::size_t c = 0; c < cfg.n_classes; ++c) ds.info.class_names.push_back("class_" + std::to_string(c));
    for (const Modality m : kAllModalities) ds.info.modality_dims[index_of(m)] = cfg.modality_dims[index_of(m)];

    const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(cfg.n_samples)));
    const auto n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(cfg.n_samples)));
    const double rho = cfg.cross_modal_correlation;

    std::vector<double> shared(latent);
    for (std::size_t i = 0; i < cfg.n_samples; ++i) {
        const std::size_t primary = rng.below(cfg.n_classes);
        std::vector<std::size_t> active = {primary};
        if (cfg.multi_label) {
            for (std::size_t c = 0; c < cfg.n_classes; ++c) {
                if (c != primary && rng.uniform() < cfg.extra_label_prob) active.push_back(c);
            }
        }
        std::fill(shared.begin(), shared.end(), 0.0);
        const double weight = 1.0 / std::sqrt(static_cast<double>(active.size()));
        for (const std::size_t c : active) {
            const std::size_t mode = rng.below(cfg.modes_per_class);
            const auto& proto = prototypes[c * cfg.modes_per_class + mode];
            for (std::size_t k = 0; k < latent; ++k) shared[k] += weight * proto[k];
        }
        for (std::size_t k = 0; k < latent; ++k) shared[k] += cfg.within_class_std * rng.normal();

        SampleRecord rec;
        char id[32];
        std::snprintf(id, sizeof(id), "s%06zu", i);
        rec.sample_id = id;
        for (const Modality m : kAllModalities) {
            const Tensor& map = result.modality_maps[index_of(m)];
            std::vector<double> mixed(map.cols());
            for (std::size_t k = 0; k < latent; ++k) {
                mixed[k] = rho * shared[k] + (1.0 - rho) * cfg.noise_std * rng.normal();
            }
            for (std::size_t k = latent; k < mixed.size(); ++k) {
                double offset = 0.0;
                for (const std::size_t c : active) offset += weight * private_prototypes[index_of(m)][c][k - latent];
                mixed[k] = offset + cfg.private_std * rng.normal();
            }
            Tensor feature(Shape{map.rows()});
            for (std::size_t r = 0; r < map.rows(); ++r) {
                double acc = 0.0;
                for (std::size_t k = 0; k < mixed.size(); ++k) acc += static_cast<double>(map(r, k)) * mixed[k];
                if (cfg.observation_std > 0.0) acc += cfg.observation_std * rng.normal();
                feature[r] = static_cast<float>(acc);
            }
            rec.features[index_of(m)] = std::move(feature);
        }

        if (cfg.multi_label) {
            MultiLabel bits(cfg.n_classes, 0);
            for (const std::size_t c : active) bits[c] = 1;
            bool any = false;
            for (auto& b : bits) {
                if (rng.uniform() < cfg.label_noise) b = static_cast<std::uint8_t>(1 - b);
                any = any || b != 0;
            }
            if (!any) bits[primary] = 1;
            rec.label = std::move(bits);
        } else {
            std::size_t label = primary;
            if (cfg.n_classes > 1 && rng.uniform() < cfg.label_noise) {
                label = (primary + 1 + rng.below(cfg.n_classes - 1)) % cfg.n_classes;
            }
            rec.label = label;
        }

        const Split split = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
        ds.split(split).push_back(std::move(rec));
    }
    return result;
}

}  // namespace mmssl
