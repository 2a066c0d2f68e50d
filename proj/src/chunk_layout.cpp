#include "sscformer/chunk_layout.hpp"

#include <algorithm>

namespace sscformer {

ChunkLayout make_layout(std::size_t len, std::size_t chunk_size) {
    if (len == 0 || chunk_size == 0) {
        throw ConfigError("chunk layout needs positive length and chunk size, got L=" + std::to_string(len) +
                          " W=" + std::to_string(chunk_size));
    }
    ChunkLayout layout;
    layout.original_len = len;
    layout.chunk_size = chunk_size;
    layout.num_chunks = (len + chunk_size - 1) / chunk_size;
    layout.padded_len = layout.num_chunks * chunk_size;
    return layout;
}

std::vector<std::size_t> SamplingPlan::sampled_chunk(std::size_t k, std::size_t chunk_size) const {
    const auto first = gather.begin() + static_cast<std::ptrdiff_t>(k * chunk_size);
    return {first, first + static_cast<std::ptrdiff_t>(chunk_size)};
}

SamplingPlan make_sampling_plan(const ChunkLayout &layout) {
    const std::size_t w = layout.chunk_size;
    const std::size_t cn = layout.num_chunks;
    SamplingPlan plan;
    plan.gather.resize(layout.padded_len);
    plan.scatter.resize(layout.padded_len);
    for (std::size_t k = 0; k < cn; ++k) {
        for (std::size_t j = 0; j < w; ++j) {
            plan.gather[k * w + j] = j * cn + k;
        }
    }
    for (std::size_t i = 0; i < plan.gather.size(); ++i) {
        plan.scatter[plan.gather[i]] = i;
    }
    return plan;
}

template <typename T>
BasicTensor<T> apply_plan(const BasicTensor<T> &x, const SamplingPlan &plan, PlanDirection direction) {
    const auto &index = direction == PlanDirection::gather ? plan.gather : plan.scatter;
    if (x.rank() < 1 || x.shape().front() != index.size()) {
        throw DimensionError("apply_plan: tensor " + shape_to_string(x.shape()) + " for a plan over " +
                             std::to_string(index.size()) + " tokens");
    }
    BasicTensor<T> out(x.shape());
    const std::size_t width = x.size() / index.size();
    for (std::size_t i = 0; i < index.size(); ++i) {
        const auto src = x.data().subspan(index[i] * width, width);
        std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * width));
    }
    return out;
}

template <typename T>
PaddedBatch<T> pad_batch(const std::vector<BasicTensor<T>> &sequences, std::size_t chunk_size) {
    if (sequences.empty()) {
        throw DimensionError("pad_batch needs at least one sequence");
    }
    const std::size_t d = sequences.front().cols();
    std::size_t longest = 0;
    for (const auto &seq : sequences) {
        if (seq.rank() != 2 || seq.cols() != d) {
            throw DimensionError("pad_batch: mixed feature dims, " + shape_to_string(seq.shape()) + " vs width " +
                                 std::to_string(d));
        }
        longest = std::max(longest, seq.rows());
    }
    const ChunkLayout layout = make_layout(longest, chunk_size);
    PaddedBatch<T> batch;
    batch.padded_len = layout.padded_len;
    batch.data = BasicTensor<T>(Shape{sequences.size(), layout.padded_len, d});
    for (std::size_t b = 0; b < sequences.size(); ++b) {
        const auto src = sequences[b].data();
        std::copy(src.begin(), src.end(),
                  batch.data.data().begin() + static_cast<std::ptrdiff_t>(b * layout.padded_len * d));
        batch.lengths.push_back(sequences[b].rows());
    }
    return batch;
}

template BasicTensor<float> apply_plan(const BasicTensor<float> &, const SamplingPlan &, PlanDirection);
template BasicTensor<double> apply_plan(const BasicTensor<double> &, const SamplingPlan &, PlanDirection);
template PaddedBatch<float> pad_batch(const std::vector<BasicTensor<float>> &, std::size_t);
template PaddedBatch<double> pad_batch(const std::vector<BasicTensor<double>> &, std::size_t);

} // namespace sscformer
