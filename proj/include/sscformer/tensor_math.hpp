#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sscformer/tensor.hpp"

namespace sscformer {

// Boolean flags stored one byte each so they can be viewed through std::span.
using BoolVec = std::vector<std::uint8_t>;

// How depthwise convolution treats reads outside the sequence.
struct PadPolicy {
    enum class Kind { zero_global, zero_per_chunk };

    Kind kind = Kind::zero_global;
    std::size_t chunk = 0;

    static PadPolicy global() { return {Kind::zero_global, 0}; }
    // Every chunk of `w` rows is convolved in isolation.
    static PadPolicy per_chunk(std::size_t w) { return {Kind::zero_per_chunk, w}; }
};

// a[m x k] * b[k x n]; the k-sum runs left to right so results are reproducible.
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T> &a, const BasicTensor<T> &b);

// Adds `bias` (length n) to every row of `x` in place.
template <typename T>
void add_row_bias(BasicTensor<T> &x, std::span<const T> bias);

// Single-row kernel: writes probabilities into `out`. Masked entries become
// exactly 0; a row with no admissible entry yields all zeros.
template <typename T>
void softmax_masked_row(std::span<const T> scores, std::span<const std::uint8_t> mask, std::span<T> out);

// Applies the same mask row to every row of `scores`.
template <typename T>
BasicTensor<T> softmax_masked(const BasicTensor<T> &scores, std::span<const std::uint8_t> mask);

// Normalizes over the last axis with population variance.
template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T> &x, std::span<const T> gain, std::span<const T> bias,
                          T eps = T(1e-5));

template <typename T>
BasicTensor<T> swish(const BasicTensor<T> &x);

// Splits the last axis in half: first * sigmoid(second).
template <typename T>
BasicTensor<T> glu(const BasicTensor<T> &x);

template <typename T>
T sigmoid(T v);

/// Per-channel 1-D convolution over the rows of x[L x d].
///
/// Tap j of the odd-length kernel reads offset j - (K-1)/2; taps with
/// tap_mask[j] == 0 are skipped. Reads outside [0, L), or outside the current
/// chunk under PadPolicy::per_chunk, contribute zero.
template <typename T>
BasicTensor<T> depthwise_conv_masked(const BasicTensor<T> &x, const BasicTensor<T> &kernel,
                                     std::span<const std::uint8_t> tap_mask, PadPolicy pad);

} // namespace sscformer
