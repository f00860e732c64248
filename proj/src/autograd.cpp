// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmssl/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

namespace mmssl {

template <typename T>
Var Tape<T>::constant(TensorT value) {
    Node node;
    node.owned = std::move(value);
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::input(TensorT value) {
    Node node;
    node.owned = std::move(value);
    node.requires_grad = true;
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::parameter(BasicParameter<T>& param, bool trainable) {
    Node node;
    node.external = &param.value;
    if (trainable) {
        node.requires_grad = true;
        node.param = &param;
    }
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

template <typename T>
const typename Tape<T>::TensorT& Tape<T>::value(Var v) const {
    const Node& node = nodes_.at(v.id);
    return node.external != nullptr ? *node.external : node.owned;
}

template <typename T>
const typename Tape<T>::TensorT& Tape<T>::grad(Var v) const {
    const Node& node = nodes_.at(v.id);
    if (!node.grad_ready) {
        // Callers asking for an unreached gradient get zeros of the right shape.
        auto& self = const_cast<Node&>(node);
        self.grad = TensorT(value(v).shape());
        self.grad_ready = true;
    }
    return node.grad;
}

template <typename T>
typename Tape<T>::TensorT& Tape<T>::grad_slot(Var v) {
    Node& node = nodes_.at(v.id);
    if (!node.grad_ready) {
        node.grad = TensorT(value(v).shape());
        node.grad_ready = true;
    }
    return node.grad;
}

template <typename T>
Var Tape<T>::record(TensorT value, std::span<const Var> inputs, BackwardFn fn) {
    Node node;
    node.owned = std::move(value);
    for (const Var in : inputs) {
        if (nodes_.at(in.id).requires_grad) node.requires_grad = true;
    }
    if (node.requires_grad) node.backward = std::move(fn);
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

template <typename T>
void Tape<T>::backward(Var loss) {
    if (value(loss).size() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " + shape_string(value(loss).shape()));
    }
    for (Node& node : nodes_) {
        node.grad_ready = false;
        node.grad = TensorT();
    }
    grad_slot(loss)[0] = T{1};
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& node = nodes_[i];
        if (!node.requires_grad || !node.grad_ready || !node.backward) continue;
        node.backward(*this, Var{i});
    }
    for (Node& node : nodes_) {
        if (node.param == nullptr || !node.grad_ready) continue;
        auto dst = node.param->grad.data();
        auto src = node.grad.data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
}

namespace ops {
namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw DimensionError(what);
}

template <typename T>
bool needs(Tape<T>& tape, Var v) {
    return tape.requires_grad(v);
}

}  // namespace

template <typename T>
Var linear(Tape<T>& tape, Var x, Var w, Var bias) {
    const auto& xv = tape.value(x);
    const auto& wv = tape.value(w);
    const auto& bv = tape.value(bias);
    require(xv.rank() == 2 && wv.rank() == 2, "linear: expected matrices, got x " + shape_string(xv.shape()) +
                                                   " and weight " + shape_string(wv.shape()));
    const std::size_t batch = xv.rows(), in = xv.cols(), out = wv.cols();
    require(wv.rows() == in, "linear: x " + shape_string(xv.shape()) + " incompatible with weight " +
                                 shape_string(wv.shape()));
    require(bv.size() == out && bv.rank() == 1, "linear: bias " + shape_string(bv.shape()) + " for " +
                                                    std::to_string(out) + " outputs");

    BasicTensor<T> result(Shape{batch, out});
    std::vector<double> acc(out);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < out; ++o) acc[o] = static_cast<double>(bv[o]);
        for (std::size_t i = 0; i < in; ++i) {
            const double xi = xv(b, i);
            if (xi == 0.0) continue;
            const T* wrow = &wv[i * out];
            for (std::size_t o = 0; o < out; ++o) acc[o] += xi * static_cast<double>(wrow[o]);
        }
        for (std::size_t o = 0; o < out; ++o) result(b, o) = static_cast<T>(acc[o]);
    }

    const Var inputs[] = {x, w, bias};
    return tape.record(std::move(result), inputs, [x, w, bias, batch, in, out](Tape<T>& t, Var self) {
        const auto& g = t.grad(self);
        const auto& xv = t.value(x);
        const auto& wv = t.value(w);
        if (needs(t, x)) {
            auto& gx = t.grad_slot(x);
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t i = 0; i < in; ++i) {
                    double acc = 0.0;
                    const T* wrow = &wv[i * out];
                    for (std::size_t o = 0; o < out; ++o) acc += static_cast<double>(g(b, o)) * wrow[o];
                    gx(b, i) += static_cast<T>(acc);
                }
            }
        }
        if (needs(t, w)) {
            auto& gw = t.grad_slot(w);
            std::vector<double> acc(in * out, 0.0);
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t i = 0; i < in; ++i) {
                    const double xi = xv(b, i);
                    if (xi == 0.0) continue;
                    double* arow = &acc[i * out];
                    for (std::size_t o = 0; o < out; ++o) arow[o] += xi * static_cast<double>(g(b, o));
                }
            }
            for (std::size_t k = 0; k < acc.size(); ++k) gw[k] += static_cast<T>(acc[k]);
        }
        if (needs(t, bias)) {
            auto& gb = t.grad_slot(bias);
            for (std::size_t o = 0; o < out; ++o) {
                double acc = 0.0;
                for (std::size_t b = 0; b < batch; ++b) acc += g(b, o);
                gb[o] += static_cast<T>(acc);
            }
        }
    });
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
    const auto& xv = tape.value(x);
    BasicTensor<T> result(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) result[i] = xv[i] > T{0} ? xv[i] : T{0};
    const Var inputs[] = {x};
    return tape.record(std::move(result), inputs, [x](Tape<T>& t, Var self) {
        const auto& g = t.grad(self);
        const auto& xv = t.value(x);
        auto& gx = t.grad_slot(x);
        for (std::size_t i = 0; i < xv.size(); ++i) {
            if (xv[i] > T{0}) gx[i] += g[i];
        }
    });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
    const auto& av = tape.value(a);
    const auto& bv = tape.value(b);
    require(av.shape() == bv.shape(),
            "add: shape mismatch " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
    BasicTensor<T> result(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) result[i] = av[i] + bv[i];
    const Var inputs[] = {a, b};
    return tape.record(std::move(result), inputs, [a, b](Tape<T>& t, Var self) {
        const auto& g = t.grad(self);
        for (const Var v : {a, b}) {
            if (!needs(t, v)) continue;
            auto& gv = t.grad_slot(v);
            for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
        }
    });
}

template <typename T>
Var add_scalar(Tape<T>& tape, Var a, double c) {
    const auto& av = tape.value(a);
    BasicTensor<T> result(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) result[i] = static_cast<T>(static_cast<double>(av[i]) + c);
    const Var inputs[] = {a};
    return tape.record(std::move(result), inputs, [a](Tape<T>& t, Var self) {
        const auto& g = t.grad(self);
        auto& ga = t.grad_slot(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

template <typename T>
Var scale(Tape<T>& tape, Var a, double factor) {
    const auto& av = tape.value(a);
    BasicTensor<T> result(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) result[i] = static_cast<T>(static_cast<double>(av[i]) * factor);
    const Var inputs[] = {a};
    return tape.record(std::move(result), inputs, [a, factor](Tape<T>& t, Var self) {
        const auto& g = t.grad(self);
        auto& ga = t.grad_slot(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += static_cast<T>(static_cast<double>(g[i]) * factor);
    });
}

template <typename T>
Var mean(Tape<T>& tape, Var a) {
    const auto& av = tape.value(a);
    require(av.size() > 0, "mean: empty tensor");
    double acc = 0.0;
    for (const T v : av.data()) acc += v;
    const std::size_t n = av.size();
    const Var inputs[] = {a};
    return tape.record(BasicTensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n))), inputs,
                       [a, n](Tape<T>& t, Var self) {
                           const double g = t.grad(self)[0] / static_cast<double>(n);
                           auto& ga = t.grad_slot(a);
                           for (std::size_t i = 0; i < n; ++i) ga[i] += static_cast<T>(g);
                       });
}

template <typename T>
Var mse(Tape<T>& tape, Var prediction, Var target) {
    const auto& pv = tape.value(prediction);
    const auto& tv = tape.value(target);
    require(pv.shape() == tv.shape(),
            "mse: shape mismatch " + shape_string(pv.shape()) + " vs " + shape_string(tv.shape()));
    require(pv.size() > 0, "mse: empty tensor");
    double acc = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const double d = static_cast<double>(pv[i]) - static_cast<double>(tv[i]);
        acc += d * d;
    }
    const std::size_t n = pv.size();
    const Var inputs[] = {prediction, target};
    return tape.record(BasicTensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n))), inputs,
                       [prediction, target, n](Tape<T>& t, Var self) {
                           const double g = 2.0 * t.grad(self)[0] / static_cast<double>(n);
                           const auto& pv = t.value(prediction);
                           const auto& tv = t.value(target);
                           if (needs(t, prediction)) {
                               auto& gp = t.grad_slot(prediction);
                               for (std::size_t i = 0; i < n; ++i) {
                                   gp[i] += static_cast<T>(g * (static_cast<double>(pv[i]) - tv[i]));
                               }
                           }
                           if (needs(t, target)) {
                               auto& gt = t.grad_slot(target);
                               for (std::size_t i = 0; i < n; ++i) {
                                   gt[i] -= static_cast<T>(g * (static_cast<double>(pv[i]) - tv[i]));
                               }
                           }
                       });
}

template <typename T>
Var matmul_nt(Tape<T>& tape, Var a, Var b) {
    const auto& av = tape.value(a);
    const auto& bv = tape.value(b);
    require(av.rank() == 2 && bv.rank() == 2 && av.cols() == bv.cols(),
            "matmul_nt: shape mismatch " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
    const std::size_t n = av.rows(), m = bv.rows(), d = av.cols();
    BasicTensor<T> result(Shape{n, m});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) acc += static_cast<double>(av(i, k)) * bv(j, k);
            result(i, j) = static_cast<T>(acc);
        }
    }
    const Var inputs[] = {a, b};
    return tape.record(std::move(result), inputs, [a, b, n, m, d](Tape<T>& t, Var self) {
        const auto& g = t.grad(self);
        const auto& av = t.value(a);
        const auto& bv = t.value(b);
        if (needs(t, a)) {
            auto& ga = t.grad_slot(a);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t k = 0; k < d; ++k) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < m; ++j) acc += static_cast<double>(g(i, j)) * bv(j, k);
                    ga(i, k) += static_cast<T>(acc);
                }
            }
        }
        if (needs(t, b)) {
            auto& gb = t.grad_slot(b);
            for (std::size_t j = 0; j < m; ++j) {
                for (std::size_t k = 0; k < d; ++k) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(g(i, j)) * av(i, k);
                    gb(j, k) += static_cast<T>(acc);
                }
            }
        }
    });
}

template <typename T>
Var l2_normalize_rows(Tape<T>& tape, Var a, double eps) {
    const auto& av = tape.value(a);
    require(av.rank() == 2, "l2_normalize_rows: expected matrix, got " + shape_string(av.shape()));
    const std::size_t n = av.rows(), d = av.cols();
    auto norms = std::make_shared<std::vector<double>>(n);
    BasicTensor<T> result(av.shape());
    for (std::size_t i = 0; i < n; ++i) {
        double ss = 0.0;
        for (std::size_t k = 0; k < d; ++k) ss += static_cast<double>(av(i, k)) * av(i, k);
        const double norm = std::max(std::sqrt(ss), eps);
        (*norms)[i] = norm;
        for (std::size_t k = 0; k < d; ++k) result(i, k) = static_cast<T>(av(i, k) / norm);
    }
    const Var inputs[] = {a};
    return tape.record(std::move(result), inputs, [a, n, d, norms, eps](Tape<T>& t, Var self) {
        const auto& g = t.grad(self);
        const auto& av = t.value(a);
        auto& ga = t.grad_slot(a);
        for (std::size_t i = 0; i < n; ++i) {
            const double norm = (*norms)[i];
            if (norm <= eps) {
                for (std::size_t k = 0; k < d; ++k) ga(i, k) += static_cast<T>(g(i, k) / norm);
                continue;
            }
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += static_cast<double>(g(i, k)) * av(i, k);
            const double inv = 1.0 / norm;
            const double coeff = dot * inv * inv * inv;
            for (std::size_t k = 0; k < d; ++k) {
                ga(i, k) += static_cast<T>(g(i, k) * inv - av(i, k) * coeff);
            }
        }
    });
}

template <typename T>
Var concat_rows(Tape<T>& tape, std::span<const Var> parts) {
    require(!parts.empty(), "concat_rows: no inputs");
    const std::size_t cols = tape.value(parts[0]).cols();
    std::size_t rows = 0;
    for (const Var p : parts) {
        require(tape.value(p).rank() == 2 && tape.value(p).cols() == cols,
                "concat_rows: column mismatch at shape " + shape_string(tape.value(p).shape()));
        rows += tape.value(p).rows();
    }
    BasicTensor<T> result(Shape{rows, cols});
    std::size_t offset = 0;
    for (const Var p : parts) {
        const auto& pv = tape.value(p);
        std::copy(pv.data().begin(), pv.data().end(), result.data().begin() + static_cast<std::ptrdiff_t>(offset));
        offset += pv.size();
    }
    std::vector<Var> saved(parts.begin(), parts.end());
    return tape.record(std::move(result), parts, [saved](Tape<T>& t, Var self) {
        const auto& g = t.grad(self);
        std::size_t offset = 0;
        for (const Var p : saved) {
            const std::size_t n = t.value(p).size();
            if (needs(t, p)) {
                auto& gp = t.grad_slot(p);
                for (std::size_t k = 0; k < n; ++k) gp[k] += g[offset + k];
            }
            offset += n;
        }
    });
}

template <typename T>
Var concat_cols(Tape<T>& tape, std::span<const Var> parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    const std::size_t rows = tape.value(parts[0]).rows();
    std::size_t cols = 0;
    for (const Var p : parts) {
        require(tape.value(p).rank() == 2 && tape.value(p).rows() == rows,
                "concat_cols: row mismatch at shape " + shape_string(tape.value(p).shape()));
        cols += tape.value(p).cols();
    }
    BasicTensor<T> result(Shape{rows, cols});
    std::size_t offset = 0;
    for (const Var p : parts) {
        const auto& pv = tape.value(p);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < pv.cols(); ++c) result(r, offset + c) = pv(r, c);
        }
        offset += pv.cols();
    }
    std::vector<Var> saved(parts.begin(), parts.end());
    return tape.record(std::move(result), parts, [saved, rows](Tape<T>& t, Var self) {
        const auto& g = t.grad(self);
        std::size_t offset = 0;
        for (const Var p : saved) {
            const std::size_t c = t.value(p).cols();
            if (needs(t, p)) {
                auto& gp = t.grad_slot(p);
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t k = 0; k < c; ++k) gp(r, k) += g(r, offset + k);
                }
            }
            offset += c;
        }
    });
}

template <typename T>
Var mean_of(Tape<T>& tape, std::span<const Var> parts) {
    require(!parts.empty(), "mean_of: no inputs");
    const Shape shape = tape.value(parts[0]).shape();
    for (const Var p : parts) {
        require(tape.value(p).shape() == shape, "mean_of: shape mismatch " + shape_string(shape) + " vs " +
                                                    shape_string(tape.value(p).shape()));
    }
    const double count = static_cast<double>(parts.size());
    BasicTensor<T> result(shape);
    for (std::size_t i = 0; i < result.size(); ++i) {
        double acc = 0.0;
        for (const Var p : parts) acc += tape.value(p)[i];
        result[i] = static_cast<T>(acc / count);
    }
    std::vector<Var> saved(parts.begin(), parts.end());
    return tape.record(std::move(result), parts, [saved, count](Tape<T>& t, Var self) {
        const auto& g = t.grad(self);
        for (const Var p : saved) {
            if (!needs(t, p)) continue;
            auto& gp = t.grad_slot(p);
            for (std::size_t i = 0; i < g.size(); ++i) gp[i] += static_cast<T>(g[i] / count);
        }
    });
}

template <typename T>
Var margin_cross_entropy(Tape<T>& tape, Var logits, std::span<const std::size_t> targets, double margin,
                         std::span<const std::uint8_t> mask) {
    const auto& z = tape.value(logits);
    require(z.rank() == 2, "margin_cross_entropy: expected matrix logits, got " + shape_string(z.shape()));
    const std::size_t rows = z.rows(), cols = z.cols();
    require(targets.size() == rows, "margin_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                                        std::to_string(rows) + " rows");
    require(mask.empty() || mask.size() == rows * cols, "margin_cross_entropy: mask size mismatch");
    require(rows > 0, "margin_cross_entropy: no rows");

    // Softmax probabilities over kept columns are saved for the backward pass.
    auto probs = std::make_shared<std::vector<double>>(rows * cols, 0.0);
    std::vector<double> shifted(cols);
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t target = targets[r];
        if (target >= cols) throw ContractError("margin_cross_entropy: target index out of range");
        if (!mask.empty() && mask[r * cols + target] == 0) {
            throw ContractError("margin_cross_entropy: target column is masked out");
        }
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cols; ++c) {
            if (!mask.empty() && mask[r * cols + c] == 0) continue;
            shifted[c] = static_cast<double>(z(r, c)) - (c == target ? margin : 0.0);
            peak = std::max(peak, shifted[c]);
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            if (!mask.empty() && mask[r * cols + c] == 0) continue;
            sum += std::exp(shifted[c] - peak);
        }
        const double log_norm = peak + std::log(sum);
        total += log_norm - shifted[target];
        for (std::size_t c = 0; c < cols; ++c) {
            if (!mask.empty() && mask[r * cols + c] == 0) continue;
            (*probs)[r * cols + c] = std::exp(shifted[c] - log_norm);
        }
    }
    std::vector<std::size_t> saved_targets(targets.begin(), targets.end());
    const Var inputs[] = {logits};
    return tape.record(BasicTensor<T>::scalar(static_cast<T>(total / static_cast<double>(rows))), inputs,
                       [logits, rows, cols, probs, saved_targets](Tape<T>& t, Var self) {
                           const double g = t.grad(self)[0] / static_cast<double>(rows);
                           auto& gz = t.grad_slot(logits);
                           for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t c = 0; c < cols; ++c) {
                                   const double p = (*probs)[r * cols + c] - (c == saved_targets[r] ? 1.0 : 0.0);
                                   gz(r, c) += static_cast<T>(g * p);
                               }
                           }
                       });
}

template <typename T>
Var sigmoid_bce(Tape<T>& tape, Var logits, const BasicTensor<T>& targets) {
    const auto& z = tape.value(logits);
    require(z.shape() == targets.shape(),
            "sigmoid_bce: shape mismatch " + shape_string(z.shape()) + " vs " + shape_string(targets.shape()));
    require(z.size() > 0, "sigmoid_bce: empty tensor");
    const std::size_t n = z.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = z[i];
        const double y = targets[i];
        // max(x,0) - x*y + log(1 + e^{-|x|})
        total += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    }
    const Var inputs[] = {logits};
    return tape.record(BasicTensor<T>::scalar(static_cast<T>(total / static_cast<double>(n))), inputs,
                       [logits, targets, n](Tape<T>& t, Var self) {
                           const double g = t.grad(self)[0] / static_cast<double>(n);
                           const auto& z = t.value(logits);
                           auto& gz = t.grad_slot(logits);
                           for (std::size_t i = 0; i < n; ++i) {
                               const double x = z[i];
                               const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
                               gz[i] += static_cast<T>(g * (s - static_cast<double>(targets[i])));
                           }
                       });
}

#define MMSSL_INSTANTIATE_OPS(T)                                                                          \
    template Var linear<T>(Tape<T>&, Var, Var, Var);                                                      \
    template Var relu<T>(Tape<T>&, Var);                                                                  \
    template Var add<T>(Tape<T>&, Var, Var);                                                              \
    template Var add_scalar<T>(Tape<T>&, Var, double);                                                    \
    template Var scale<T>(Tape<T>&, Var, double);                                                         \
    template Var mean<T>(Tape<T>&, Var);                                                                  \
    template Var mse<T>(Tape<T>&, Var, Var);                                                              \
    template Var matmul_nt<T>(Tape<T>&, Var, Var);                                                        \
    template Var l2_normalize_rows<T>(Tape<T>&, Var, double);                                             \
    template Var concat_rows<T>(Tape<T>&, std::span<const Var>);                                          \
    template Var concat_cols<T>(Tape<T>&, std::span<const Var>);                                          \
    template Var mean_of<T>(Tape<T>&, std::span<const Var>);                                              \
    template Var margin_cross_entropy<T>(Tape<T>&, Var, std::span<const std::size_t>, double,             \
                                         std::span<const std::uint8_t>);                                  \
    template Var sigmoid_bce<T>(Tape<T>&, Var, const BasicTensor<T>&);

MMSSL_INSTANTIATE_OPS(float)
MMSSL_INSTANTIATE_OPS(double)

#undef MMSSL_INSTANTIATE_OPS

}  // namespace ops

template class Tape<float>;
template class Tape<double>;

}  // namespace mmssl
