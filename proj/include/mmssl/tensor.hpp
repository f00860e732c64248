// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensor. Rank 0 holds a single scalar, rank 2 is the common
// [rows x cols] matrix used by every head and loss.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mmssl/error.hpp"

namespace mmssl {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

inline std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() : shape_{0}, data_{} {}

    explicit BasicTensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), T{0}) {}

    BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (shape_numel(shape_) != data_.size()) {
            throw DimensionError("tensor: shape " + shape_string(shape_) + " holds " +
                                 std::to_string(shape_numel(shape_)) + " values, got " +
                                 std::to_string(data_.size()));
        }
    }

    static BasicTensor scalar(T value) { return BasicTensor(Shape{}, {value}); }

    static BasicTensor vector(std::initializer_list<T> values) {
        return BasicTensor(Shape{values.size()}, std::vector<T>(values));
    }

    static BasicTensor matrix(std::initializer_list<std::initializer_list<T>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        std::vector<T> data;
        data.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw DimensionError("tensor: ragged matrix literal");
            data.insert(data.end(), row.begin(), row.end());
        }
        return BasicTensor(Shape{r, c}, std::move(data));
    }

    static BasicTensor filled(Shape shape, T value) {
        BasicTensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool is_scalar() const noexcept { return data_.size() == 1 && rank() <= 1; }

    std::size_t rows() const {
        require_matrix();
        return shape_[0];
    }
    std::size_t cols() const {
        require_matrix();
        return shape_[1];
    }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }
    T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * shape_[1] + c]; }
    const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * shape_[1] + c]; }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    const std::vector<T>& values() const noexcept { return data_; }

    std::span<const T> row(std::size_t r) const { return std::span<const T>(data_).subspan(r * cols(), cols()); }
    std::span<T> row(std::size_t r) { return std::span<T>(data_).subspan(r * cols(), cols()); }

    T item() const {
        if (data_.size() != 1) throw ContractError("tensor: item() on tensor of shape " + shape_string(shape_));
        return data_[0];
    }

    bool all_finite() const noexcept {
        for (const T v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    template <typename U>
    BasicTensor<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return BasicTensor<U>(shape_, std::move(out));
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    bool operator==(const BasicTensor&) const = default;

private:
    void require_matrix() const {
        if (shape_.size() != 2) throw DimensionError("tensor: expected rank 2, got shape " + shape_string(shape_));
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

// Stacks equally sized rank-1 tensors into a [n x dim] matrix.
Tensor stack_rows(std::span<const Tensor> rows);

}  // namespace mmssl
