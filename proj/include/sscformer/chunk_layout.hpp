#pragma once

#include <cstddef>
#include <vector>

#include "sscformer/tensor.hpp"

namespace sscformer {

// Partition of a sequence into non-overlapping chunks of `chunk_size` tokens.
// Sequences are right-padded up to a multiple of the chunk size.
struct ChunkLayout {
    std::size_t original_len = 0;
    std::size_t chunk_size = 0;
    std::size_t padded_len = 0;
    std::size_t num_chunks = 0;

    std::size_t padding() const noexcept { return padded_len - original_len; }
    std::size_t chunk_index(std::size_t token) const noexcept { return token / chunk_size; }
    std::size_t chunk_begin(std::size_t chunk) const noexcept { return chunk * chunk_size; }
    std::size_t chunk_end(std::size_t chunk) const noexcept { return (chunk + 1) * chunk_size; }

    bool operator==(const ChunkLayout &) const = default;
};

ChunkLayout make_layout(std::size_t len, std::size_t chunk_size);

// Index permutations realizing the sequentially sampled chunk partition.
//
// Sampled chunk k gathers every token whose index is congruent to k modulo the
// chunk count, so position k*W + j of the gathered sequence holds original
// token j*num_chunks + k. `scatter` is the inverse permutation.
struct SamplingPlan {
    std::vector<std::size_t> gather;
    std::vector<std::size_t> scatter;

    // Original token indices of sampled chunk k, in gathered order.
    std::vector<std::size_t> sampled_chunk(std::size_t k, std::size_t chunk_size) const;
};

SamplingPlan make_sampling_plan(const ChunkLayout &layout);

enum class PlanDirection { gather, scatter };

// Row permutation: out[i] = x[index[i]] with index = plan.gather or plan.scatter.
template <typename T>
BasicTensor<T> apply_plan(const BasicTensor<T> &x, const SamplingPlan &plan, PlanDirection direction);

template <typename T>
struct PaddedBatch {
    BasicTensor<T> data; // [B x padded_len x d]
    std::vector<std::size_t> lengths;
    std::size_t padded_len = 0;
};

// Zero-pads every sequence on the right to the batch maximum rounded up to a
// multiple of `chunk_size`.
template <typename T>
PaddedBatch<T> pad_batch(const std::vector<BasicTensor<T>> &sequences, std::size_t chunk_size);

} // namespace sscformer
