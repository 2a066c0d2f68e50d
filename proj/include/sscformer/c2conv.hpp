#pragma once

#include "sscformer/chunk_layout.hpp"
#include "sscformer/tensor_math.hpp"

namespace sscformer {

// Chunked causal convolution: one depthwise kernel evaluated twice, once as a
// causal convolution over the whole sequence and once chunk-locally with all
// taps, then blended by lambda.
struct C2ConvParams {
    std::size_t kernel_size = 15;
    std::size_t right_mask = 7; // causal branch skips offsets +1..+right_mask
    double lambda = 0.7;
    std::size_t chunk_size = 16;

    Tensor depthwise;      // [K x C], shared by both branches
    Tensor pointwise_in;   // [C x 2C]
    Tensor pointwise_out;  // [C x C]
    std::vector<double> norm_gain;
    std::vector<double> norm_bias;
    double eps = 1e-5;

    std::size_t channels() const { return depthwise.cols(); }
    BoolVec causal_taps() const;
    BoolVec chunked_taps() const;
    void validate() const;
};

struct C2Branches {
    Tensor causal;
    Tensor chunked;
};

// Both branch outputs before blending.
C2Branches c2_branches(const Tensor &x, const C2ConvParams &params, const ChunkLayout &layout);

// lambda * chunked + (1 - lambda) * causal, element-wise.
Tensor c2_blend(const C2Branches &branches, double lambda);

Tensor c2_depthwise(const Tensor &x, const C2ConvParams &params, const ChunkLayout &layout);

// Conformer convolution module around the C2Conv stage:
// pointwise C->2C, GLU, C2Conv, layer norm, swish, pointwise C->C.
Tensor conv_block(const Tensor &x, const C2ConvParams &params, const ChunkLayout &layout);

// Stages after the depthwise convolution (norm, swish, pointwise out).
Tensor conv_block_tail(const Tensor &depthwise_out, const C2ConvParams &params);

// Stages before it (pointwise in, GLU).
Tensor conv_block_head(const Tensor &x, const C2ConvParams &params);

} // namespace sscformer
