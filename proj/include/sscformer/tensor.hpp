#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "sscformer/errors.hpp"

namespace sscformer {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape &shape);
std::size_t shape_numel(const Shape &shape);

// Dense row-major array. Element type fixes the precision (float or double).
template <typename T>
class BasicTensor {
  public:
    using value_type = T;

    BasicTensor() = default;

    explicit BasicTensor(Shape shape) : shape_(std::move(shape)), data_(checked_numel(shape_), T(0)) {}

    BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (checked_numel(shape_) != data_.size()) {
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_to_string(shape_));
        }
    }

    static BasicTensor matrix(std::size_t rows, std::size_t cols) { return BasicTensor(Shape{rows, cols}); }

    // Build a 2-D tensor from nested literal rows; used mostly by tests.
    static BasicTensor from_rows(std::initializer_list<std::initializer_list<T>> rows);

    const Shape &shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    // Leading extent for 2-D use; last axis is the feature axis.
    std::size_t rows() const { return rank() == 0 ? 0 : size() / cols(); }
    std::size_t cols() const { return rank() == 0 ? 0 : shape_.back(); }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    const std::vector<T> &values() const noexcept { return data_; }

    std::span<T> row(std::size_t r) { return std::span<T>(data_).subspan(r * cols(), cols()); }
    std::span<const T> row(std::size_t r) const {
        return std::span<const T>(data_).subspan(r * cols(), cols());
    }

    T &operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    const T &operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    T &operator[](std::size_t i) { return data_[i]; }
    const T &operator[](std::size_t i) const { return data_[i]; }

    bool operator==(const BasicTensor &other) const = default;

    bool all_finite() const;

    // Copy of rows [begin, end).
    BasicTensor slice_rows(std::size_t begin, std::size_t end) const;

    // Same data viewed under a new shape with equal element count.
    BasicTensor reshaped(Shape shape) const;

  private:
    static std::size_t checked_numel(const Shape &shape) {
        for (std::size_t extent : shape) {
            if (extent == 0) {
                throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
            }
        }
        return shape_numel(shape);
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<double>;
using TensorF = BasicTensor<float>;

// Largest element-wise |a - b|; shapes must agree.
template <typename T>
double max_abs_diff(const BasicTensor<T> &a, const BasicTensor<T> &b);

template <typename T>
BasicTensor<T> BasicTensor<T>::from_rows(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t n = rows.size();
    const std::size_t m = n == 0 ? 0 : rows.begin()->size();
    BasicTensor out(Shape{n, m});
    std::size_t r = 0;
    for (const auto &row : rows) {
        if (row.size() != m) {
            throw DimensionError("ragged rows in from_rows");
        }
        std::size_t c = 0;
        for (T v : row) {
            out(r, c++) = v;
        }
        ++r;
    }
    return out;
}

} // namespace sscformer
