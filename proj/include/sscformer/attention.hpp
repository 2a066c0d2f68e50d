#pragma once

#include <cstdint>

#include "sscformer/masks.hpp"
#include "sscformer/tensor.hpp"

namespace sscformer {

template <typename T>
struct MhsaParams {
    std::size_t d_model = 0;
    std::size_t n_heads = 0;
    BasicTensor<T> w_q; // [C x C]
    BasicTensor<T> w_k;
    BasicTensor<T> w_v;
    BasicTensor<T> w_o;

    std::size_t head_dim() const { return d_model / n_heads; }
    // Throws ConfigError / DimensionError.
    void validate() const;
};

// Multiply-accumulate counts; softmax is not counted.
struct MacCount {
    std::uint64_t projections = 0; // Q, K, V
    std::uint64_t qk_scores = 0;
    std::uint64_t av_mix = 0;
    std::uint64_t output_proj = 0;

    std::uint64_t total() const { return projections + qk_scores + av_mix + output_proj; }

    MacCount &operator+=(const MacCount &other);
    bool operator==(const MacCount &) const = default;
};

template <typename T>
struct MhsaResult {
    BasicTensor<T> output;
    MacCount macs;
};

/// Masked multi-head self-attention over x[Lp x C].
///
/// Chunk and ssc masks are evaluated block by block: ssc first gathers the
/// projected rows into sampled chunks, attends inside each W-token block with
/// the local mask stack and scatters the result back. Time-restricted masks
/// attend each query chunk over its admissible prefix, global over all rows.
/// Rows without any admissible key (padding) produce zero output.
template <typename T>
MhsaResult<T> mhsa(const BasicTensor<T> &x, const MhsaParams<T> &params, const AttnMask &mask);

/// One attention block: queries[n x C] against keys/values[m x C] under an
/// n x m admissibility matrix. All n*m scores are computed; masked ones get
/// zero weight. Shared by the offline and incremental paths so both follow the
/// same arithmetic order. Adds the MACs it performs to `macs`.
template <typename T>
BasicTensor<T> attend_block(const BasicTensor<T> &queries, const BasicTensor<T> &keys,
                            const BasicTensor<T> &values, std::span<const std::uint8_t> admit,
                            std::size_t n_heads, MacCount &macs);

// Closed-form MAC count for a sequence of length L, chunk size W, width C.
MacCount predict_macs(AttnKind kind, std::size_t len, std::size_t chunk_size, std::size_t d_model);

} // namespace sscformer
