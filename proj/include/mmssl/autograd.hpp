// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation over a closed set of ops: the MLP building
// blocks (linear, relu) and the pieces the self-supervised losses are made of
// (row normalization, pairwise dot products, masked margin cross-entropy, ...).
//
// A Tape records one forward pass. Ops append nodes; backward() walks them in
// reverse and accumulates into the grad slots of any Parameter bound to the tape.
// Reductions run in double and are cast back, in a fixed order.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mmssl/parameter.hpp"
#include "mmssl/tensor.hpp"

namespace mmssl {

// Handle to a node on a Tape.
struct Var {
    std::size_t id = 0;
};

template <typename T>
class Tape {
public:
    using TensorT = BasicTensor<T>;
    using BackwardFn = std::function<void(Tape&, Var self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Input that never receives a gradient.
    Var constant(TensorT value);
    // Input whose gradient is tracked and can be read back with grad().
    Var input(TensorT value);
    // Binds a parameter by reference. When trainable, backward() adds into param.grad;
    // otherwise the node is a constant.
    Var parameter(BasicParameter<T>& param, bool trainable = true);

    const TensorT& value(Var v) const;
    // Zero tensor if backward never reached the node.
    const TensorT& grad(Var v) const;
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Requires a single-element loss. Each call recomputes node gradients from
    // scratch and adds them into bound parameter grads, so two calls accumulate.
    void backward(Var loss);

    // Op plumbing.
    Var record(TensorT value, std::span<const Var> inputs, BackwardFn fn);
    TensorT& grad_slot(Var v);

private:
    struct Node {
        TensorT owned;
        const TensorT* external = nullptr;
        TensorT grad;
        bool grad_ready = false;
        bool requires_grad = false;
        BasicParameter<T>* param = nullptr;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
    TensorT empty_;
};

namespace ops {

// out[b,o] = sum_i x[b,i] * w[i,o] + bias[o]
template <typename T>
Var linear(Tape<T>& tape, Var x, Var w, Var bias);

template <typename T>
Var relu(Tape<T>& tape, Var x);

template <typename T>
Var add(Tape<T>& tape, Var a, Var b);

// a + c for a constant c.
template <typename T>
Var add_scalar(Tape<T>& tape, Var a, double c);

template <typename T>
Var scale(Tape<T>& tape, Var a, double factor);

// Mean of all elements, scalar result.
template <typename T>
Var mean(Tape<T>& tape, Var a);

// Mean squared error over all elements.
template <typename T>
Var mse(Tape<T>& tape, Var prediction, Var target);

// Pairwise dot products: out[i,j] = a_i . b_j for a [n x d], b [m x d].
template <typename T>
Var matmul_nt(Tape<T>& tape, Var a, Var b);

// Rows scaled to unit L2 norm; norms below eps are clamped to eps.
template <typename T>
Var l2_normalize_rows(Tape<T>& tape, Var a, double eps = 1e-12);

template <typename T>
Var concat_rows(Tape<T>& tape, std::span<const Var> parts);

template <typename T>
Var concat_cols(Tape<T>& tape, std::span<const Var> parts);

// Elementwise mean of equally shaped tensors.
template <typename T>
Var mean_of(Tape<T>& tape, std::span<const Var> parts);

// Row-wise softmax cross-entropy with a margin:
//   loss_r = -log( e^{z[r,t]-margin} / (e^{z[r,t]-margin} + sum_{j != t, mask} e^{z[r,j]}) )
// averaged over rows. mask (rows*cols, 1 = keep) may be empty; the target column
// must be kept. margin = 0 gives the plain softmax cross-entropy.
template <typename T>
Var margin_cross_entropy(Tape<T>& tape, Var logits, std::span<const std::size_t> targets, double margin,
                         std::span<const std::uint8_t> mask = {});

// Mean binary cross-entropy of sigmoid(logits) against {0,1} targets.
template <typename T>
Var sigmoid_bce(Tape<T>& tape, Var logits, const BasicTensor<T>& targets);

}  // namespace ops

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace mmssl
