#include "sscformer/tensor_math.hpp"

#include <algorithm>
#include <cmath>

namespace sscformer {

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T> &a, const BasicTensor<T> &b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw DimensionError("matmul shape mismatch: " + shape_to_string(a.shape()) + " x " +
                             shape_to_string(b.shape()));
    }
    const std::size_t m = a.rows();
    const std::size_t k = a.cols();
    const std::size_t n = b.cols();
    BasicTensor<T> out = BasicTensor<T>::matrix(m, n);
    std::vector<T> acc(n);
    for (std::size_t i = 0; i < m; ++i) {
        std::fill(acc.begin(), acc.end(), T(0));
        // i-p-j order keeps b row-contiguous; each acc[j] still sums p = 0..k-1 in order.
        for (std::size_t p = 0; p < k; ++p) {
            const T aip = a(i, p);
            const T *brow = &b(p, 0);
            for (std::size_t j = 0; j < n; ++j) {
                acc[j] += aip * brow[j];
            }
        }
        std::copy(acc.begin(), acc.end(), out.row(i).begin());
    }
    return out;
}

template <typename T>
void add_row_bias(BasicTensor<T> &x, std::span<const T> bias) {
    if (bias.size() != x.cols()) {
        throw DimensionError("bias length " + std::to_string(bias.size()) + " does not match " +
                             shape_to_string(x.shape()));
    }
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto row = x.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            row[c] += bias[c];
        }
    }
}

template <typename T>
T sigmoid(T v) {
    // Split by sign so exp never overflows.
    if (v >= T(0)) {
        return T(1) / (T(1) + std::exp(-v));
    }
    const T e = std::exp(v);
    return e / (T(1) + e);
}

template <typename T>
void softmax_masked_row(std::span<const T> scores, std::span<const std::uint8_t> mask, std::span<T> out) {
    if (scores.size() != mask.size() || out.size() != scores.size()) {
        throw DimensionError("softmax row length " + std::to_string(scores.size()) + " vs mask " +
                             std::to_string(mask.size()));
    }
    bool any = false;
    T peak = T(0);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (mask[i] && (!any || scores[i] > peak)) {
            peak = scores[i];
            any = true;
        }
    }
    if (!any) {
        std::fill(out.begin(), out.end(), T(0));
        return;
    }
    T total = T(0);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (mask[i]) {
            out[i] = std::exp(scores[i] - peak);
            total += out[i];
        } else {
            out[i] = T(0);
        }
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (mask[i]) {
            out[i] /= total;
        }
    }
}

template <typename T>
BasicTensor<T> softmax_masked(const BasicTensor<T> &scores, std::span<const std::uint8_t> mask) {
    if (scores.rank() == 0 || mask.size() != scores.cols()) {
        throw DimensionError("softmax mask length " + std::to_string(mask.size()) + " does not match " +
                             shape_to_string(scores.shape()));
    }
    BasicTensor<T> out(scores.shape());
    for (std::size_t r = 0; r < scores.rows(); ++r) {
        softmax_masked_row<T>(scores.row(r), mask, out.row(r));
    }
    return out;
}

template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T> &x, std::span<const T> gain, std::span<const T> bias, T eps) {
    const std::size_t d = x.cols();
    if (gain.size() != d || bias.size() != d) {
        throw DimensionError("layer_norm parameters of length " + std::to_string(gain.size()) + "/" +
                             std::to_string(bias.size()) + " for input " + shape_to_string(x.shape()));
    }
    if (!(eps > T(0))) {
        throw ConfigError("layer_norm eps must be positive");
    }
    BasicTensor<T> out(x.shape());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto in = x.row(r);
        auto dst = out.row(r);
        T mean = T(0);
        for (T v : in) {
            mean += v;
        }
        mean /= static_cast<T>(d);
        T var = T(0);
        for (T v : in) {
            var += (v - mean) * (v - mean);
        }
        var /= static_cast<T>(d);
        const T inv = T(1) / std::sqrt(var + eps);
        for (std::size_t c = 0; c < d; ++c) {
            dst[c] = (in[c] - mean) * inv * gain[c] + bias[c];
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> swish(const BasicTensor<T> &x) {
    BasicTensor<T> out = x;
    for (T &v : out.data()) {
        v = v * sigmoid(v);
    }
    return out;
}

template <typename T>
BasicTensor<T> glu(const BasicTensor<T> &x) {
    if (x.rank() == 0 || x.cols() % 2 != 0) {
        throw DimensionError("glu needs an even last axis, got " + shape_to_string(x.shape()));
    }
    const std::size_t half = x.cols() / 2;
    Shape shape = x.shape();
    shape.back() = half;
    BasicTensor<T> out(shape);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto in = x.row(r);
        auto dst = out.row(r);
        for (std::size_t c = 0; c < half; ++c) {
            dst[c] = in[c] * sigmoid(in[half + c]);
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> depthwise_conv_masked(const BasicTensor<T> &x, const BasicTensor<T> &kernel,
                                     std::span<const std::uint8_t> tap_mask, PadPolicy pad) {
    const std::size_t taps = kernel.rows();
    if (kernel.rank() != 2 || taps % 2 == 0) {
        throw ConfigError("depthwise kernel must have an odd tap count, got " + shape_to_string(kernel.shape()));
    }
    if (x.rank() != 2 || kernel.cols() != x.cols()) {
        throw DimensionError("depthwise conv channels: input " + shape_to_string(x.shape()) + ", kernel " +
                             shape_to_string(kernel.shape()));
    }
    if (tap_mask.size() != taps) {
        throw DimensionError("tap mask length " + std::to_string(tap_mask.size()) + " for " +
                             std::to_string(taps) + " taps");
    }
    if (pad.kind == PadPolicy::Kind::zero_per_chunk && pad.chunk == 0) {
        throw ConfigError("per-chunk padding needs a positive chunk size");
    }
    const auto len = static_cast<std::ptrdiff_t>(x.rows());
    const auto half = static_cast<std::ptrdiff_t>(taps / 2);
    const std::size_t channels = x.cols();
    BasicTensor<T> out(x.shape());
    std::vector<T> acc(channels);
    for (std::ptrdiff_t t = 0; t < len; ++t) {
        std::ptrdiff_t lo = 0;
        std::ptrdiff_t hi = len;
        if (pad.kind == PadPolicy::Kind::zero_per_chunk) {
            const auto w = static_cast<std::ptrdiff_t>(pad.chunk);
            lo = (t / w) * w;
            hi = std::min(len, lo + w);
        }
        std::fill(acc.begin(), acc.end(), T(0));
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(taps); ++j) {
            const std::ptrdiff_t src = t + j - half;
            if (!tap_mask[static_cast<std::size_t>(j)] || src < lo || src >= hi) {
                continue;
            }
            auto xr = x.row(static_cast<std::size_t>(src));
            auto kr = kernel.row(static_cast<std::size_t>(j));
            for (std::size_t c = 0; c < channels; ++c) {
                acc[c] += kr[c] * xr[c];
            }
        }
        std::copy(acc.begin(), acc.end(), out.row(static_cast<std::size_t>(t)).begin());
    }
    return out;
}

#define SSCFORMER_INSTANTIATE(T)                                                                              \
    template BasicTensor<T> matmul(const BasicTensor<T> &, const BasicTensor<T> &);                          \
    template void add_row_bias(BasicTensor<T> &, std::span<const T>);                                        \
    template T sigmoid(T);                                                                                   \
    template void softmax_masked_row(std::span<const T>, std::span<const std::uint8_t>, std::span<T>);       \
    template BasicTensor<T> softmax_masked(const BasicTensor<T> &, std::span<const std::uint8_t>);           \
    template BasicTensor<T> layer_norm(const BasicTensor<T> &, std::span<const T>, std::span<const T>, T);   \
    template BasicTensor<T> swish(const BasicTensor<T> &);                                                   \
    template BasicTensor<T> glu(const BasicTensor<T> &);                                                     \
    template BasicTensor<T> depthwise_conv_masked(const BasicTensor<T> &, const BasicTensor<T> &,            \
                                                  std::span<const std::uint8_t>, PadPolicy);

SSCFORMER_INSTANTIATE(float)
SSCFORMER_INSTANTIATE(double)

#undef SSCFORMER_INSTANTIATE

} // namespace sscformer
