// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmssl/losses.hpp"

#include <set>

#include "mmssl/rng.hpp"

namespace mmssl {

using nlohmann::json;

void LossConfig::validate() const {
    if (!(temperature > 0.0)) throw ConfigError("loss: temperature must be positive");
    if (!(margin >= 0.0)) throw ConfigError("loss: margin must be non-negative");
}

void to_json(json& j, const LossConfig& c) {
    j = json{{"temperature", c.temperature},
             {"margin", c.margin},
             {"normalize_embeddings", c.normalize_embeddings},
             {"method", std::string(to_string(c.method))}};
}

void from_json(const json& j, LossConfig& c) {
    c.temperature = j.value("temperature", c.temperature);
    c.margin = j.value("margin", c.margin);
    c.normalize_embeddings = j.value("normalize_embeddings", c.normalize_embeddings);
    if (j.contains("method")) {
        const auto m = parse_method(j.at("method").get<std::string>());
        if (!m) throw ConfigError("loss: unknown method '" + j.at("method").get<std::string>() + "'");
        c.method = *m;
    }
}

std::string_view to_string(LossComponent c) noexcept {
    switch (c) {
        case LossComponent::mms: return "mms";
        case LossComponent::clustering: return "clustering";
        case LossComponent::reconstruction: return "reconstruction";
        case LossComponent::info_nce: return "info_nce";
    }
    return "unknown";
}

Tensor feature_augment(const Tensor& x, std::uint64_t seed, double noise_sigma, double mask_prob) {
    if (!(noise_sigma >= 0.0)) throw ConfigError("feature_augment: noise_sigma must be non-negative");
    if (!(mask_prob >= 0.0 && mask_prob < 1.0)) throw ConfigError("feature_augment: mask_prob must lie in [0, 1)");
    Tensor out = x;
    if (noise_sigma == 0.0 && mask_prob == 0.0) return out;
    Rng rng(seed);
    for (auto& v : out.data()) {
        double value = v;
        if (noise_sigma > 0.0) value += noise_sigma * rng.normal();
        if (mask_prob > 0.0 && rng.uniform() < mask_prob) value = 0.0;
        v = static_cast<float>(value);
    }
    return out;
}

template <typename T>
Var info_nce(Tape<T>& tape, Var view, Var augmented_view, double temperature) {
    if (!(temperature > 0.0)) throw ConfigError("info_nce: temperature must be positive");
    const auto& pv = tape.value(view);
    const auto& qv = tape.value(augmented_view);
    if (pv.rank() != 2 || pv.shape() != qv.shape()) {
        throw DimensionError("info_nce: views must be equally shaped matrices, got " + shape_string(pv.shape()) +
                             " and " + shape_string(qv.shape()));
    }
    const std::size_t batch = pv.rows();
    const Var anchors = ops::l2_normalize_rows(tape, view);
    const Var positives = ops::l2_normalize_rows(tape, augmented_view);
    const Var both[] = {anchors, positives};
    const Var all = ops::concat_rows(tape, std::span<const Var>(both));
    // Row i scores anchor i against all 2B embeddings; its own column is excluded.
    const Var logits = ops::scale(tape, ops::matmul_nt(tape, anchors, all), 1.0 / temperature);
    std::vector<std::size_t> targets(batch);
    std::vector<std::uint8_t> mask(batch * 2 * batch, 1);
    for (std::size_t i = 0; i < batch; ++i) {
        targets[i] = batch + i;
        mask[i * 2 * batch + i] = 0;
    }
    return ops::margin_cross_entropy(tape, logits, targets, 0.0, mask);
}

template <typename T>
Var mms_pair(Tape<T>& tape, Var a, Var b, double margin, bool normalize) {
    const auto& av = tape.value(a);
    const auto& bv = tape.value(b);
    if (av.rank() != 2 || av.shape() != bv.shape()) {
        throw DimensionError("mms_pair: embeddings must be equally shaped matrices, got " + shape_string(av.shape()) +
                             " and " + shape_string(bv.shape()));
    }
    const std::size_t batch = av.rows();
    const Var ea = normalize ? ops::l2_normalize_rows(tape, a) : a;
    const Var eb = normalize ? ops::l2_normalize_rows(tape, b) : b;
    std::vector<std::size_t> diagonal(batch);
    for (std::size_t i = 0; i < batch; ++i) diagonal[i] = i;
    // a_i retrieves among all b_j, and b_j retrieves among all a_i.
    const Var ab = ops::margin_cross_entropy(tape, ops::matmul_nt(tape, ea, eb), diagonal, margin);
    const Var ba = ops::margin_cross_entropy(tape, ops::matmul_nt(tape, eb, ea), diagonal, margin);
    return ops::add(tape, ab, ba);
}

template <typename T>
Var mms_total(Tape<T>& tape, const ModalityMap<Var>& projections, double margin, bool normalize) {
    for (const Modality m : kAllModalities) {
        if (!projections[index_of(m)]) {
            throw ContractError("mms_total: missing " + std::string(to_string(m)) + " projection");
        }
    }
    const Var v = *projections[index_of(Modality::video)];
    const Var t = *projections[index_of(Modality::text)];
    const Var a = *projections[index_of(Modality::audio)];
    const Var va = mms_pair(tape, v, a, margin, normalize);
    const Var vt = mms_pair(tape, v, t, margin, normalize);
    const Var at = mms_pair(tape, a, t, margin, normalize);
    return ops::add(tape, ops::add(tape, va, vt), at);
}

template <typename T>
ReconTerms recon_loss(Tape<T>& tape, const ModalityMap<Var>& inputs, const ModalityMap<Var>& reconstructions) {
    ReconTerms terms;
    std::optional<Var> total;
    for (const Modality m : kAllModalities) {
        const auto& x = inputs[index_of(m)];
        const auto& xr = reconstructions[index_of(m)];
        if (!x && !xr) continue;
        if (!x || !xr) {
            throw ContractError("recon_loss: " + std::string(to_string(m)) + " has an input or a reconstruction but not both");
        }
        if (tape.value(*x).shape() != tape.value(*xr).shape()) {
            throw DimensionError("recon_loss: " + std::string(to_string(m)) + " input " +
                                 shape_string(tape.value(*x).shape()) + " vs reconstruction " +
                                 shape_string(tape.value(*xr).shape()));
        }
        const Var part = ops::mse(tape, *xr, *x);
        terms.parts[index_of(m)] = part;
        total = total ? ops::add(tape, *total, part) : part;
    }
    if (!total) throw ContractError("recon_loss: no modality to reconstruct");
    terms.total = *total;
    return terms;
}

template <typename T>
Var clustering_loss(Tape<T>& tape, Var fused, std::span<const std::size_t> assignments,
                    const BasicTensor<T>& centroids, double margin) {
    if (centroids.rank() != 2 || centroids.rows() == 0) {
        throw ContractError("clustering_loss: empty centroid set");
    }
    const auto& rv = tape.value(fused);
    if (rv.rank() != 2 || rv.cols() != centroids.cols()) {
        throw DimensionError("clustering_loss: fused " + shape_string(rv.shape()) + " vs centroids " +
                             shape_string(centroids.shape()));
    }
    if (assignments.size() != rv.rows()) {
        throw ContractError("clustering_loss: one assignment per row required");
    }
    for (const std::size_t a : assignments) {
        if (a >= centroids.rows()) throw ContractError("clustering_loss: assignment index out of range");
    }
    const Var c = tape.constant(centroids);
    const Var logits = ops::matmul_nt(tape, fused, c);
    // The margin only lowers the numerator, so it adds exactly `margin` to plain cross-entropy.
    const Var ce = ops::margin_cross_entropy(tape, logits, assignments, 0.0);
    return margin == 0.0 ? ce : ops::add_scalar(tape, ce, margin);
}

std::vector<LossComponent> required_components(Method method) {
    std::vector<LossComponent> out;
    if (uses_info_nce(method)) out.push_back(LossComponent::info_nce);
    if (uses_mms(method)) out.push_back(LossComponent::mms);
    if (uses_clustering(method)) out.push_back(LossComponent::clustering);
    if (uses_reconstruction(method)) out.push_back(LossComponent::reconstruction);
    return out;
}

template <typename T>
LossTerms multitask_loss(Tape<T>& tape, Method method, const std::map<LossComponent, Var>& components) {
    LossTerms terms;
    std::optional<Var> total;
    for (const LossComponent c : required_components(method)) {
        const auto it = components.find(c);
        if (it == components.end()) {
            throw ContractError("multitask_loss: method " + std::string(to_string(method)) + " requires component '" +
                                std::string(to_string(c)) + "'");
        }
        terms.components.emplace(c, it->second);
        total = total ? ops::add(tape, *total, it->second) : it->second;
    }
    terms.total = *total;
    return terms;
}

LossBreakdown multitask_loss(Method method, const std::map<LossComponent, float>& components) {
    LossBreakdown out;
    bool first = true;
    for (const LossComponent c : required_components(method)) {
        const auto it = components.find(c);
        if (it == components.end()) {
            throw ContractError("multitask_loss: method " + std::string(to_string(method)) + " requires component '" +
                                std::string(to_string(c)) + "'");
        }
        out.components.emplace(c, it->second);
        out.total = first ? it->second : out.total + it->second;
        first = false;
    }
    return out;
}

template <typename T>
LossBreakdown read_breakdown(const Tape<T>& tape, const LossTerms& terms) {
    LossBreakdown out;
    out.total = static_cast<float>(tape.value(terms.total).item());
    for (const auto& [c, v] : terms.components) out.components.emplace(c, static_cast<float>(tape.value(v).item()));
    return out;
}

#define MMSSL_INSTANTIATE_LOSSES(T)                                                                         \
    template Var info_nce<T>(Tape<T>&, Var, Var, double);                                                   \
    template Var mms_pair<T>(Tape<T>&, Var, Var, double, bool);                                             \
    template Var mms_total<T>(Tape<T>&, const ModalityMap<Var>&, double, bool);                             \
    template ReconTerms recon_loss<T>(Tape<T>&, const ModalityMap<Var>&, const ModalityMap<Var>&);          \
    template Var clustering_loss<T>(Tape<T>&, Var, std::span<const std::size_t>, const BasicTensor<T>&,     \
                                    double);                                                                \
    template LossTerms multitask_loss<T>(Tape<T>&, Method, const std::map<LossComponent, Var>&);            \
    template LossBreakdown read_breakdown<T>(const Tape<T>&, const LossTerms&);

MMSSL_INSTANTIATE_LOSSES(float)
MMSSL_INSTANTIATE_LOSSES(double)

#undef MMSSL_INSTANTIATE_LOSSES

}  // namespace mmssl
