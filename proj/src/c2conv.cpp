#include "sscformer/c2conv.hpp"

namespace sscformer {

BoolVec C2ConvParams::causal_taps() const {
    BoolVec taps(kernel_size, 1);
    const std::size_t centre = kernel_size / 2;
    for (std::size_t off = 1; off <= right_mask; ++off) {
        taps[centre + off] = 0;
    }
    return taps;
}

BoolVec C2ConvParams::chunked_taps() const { return BoolVec(kernel_size, 1); }

void C2ConvParams::validate() const {
    if (kernel_size % 2 == 0) {
        throw ConfigError("C2Conv kernel size must be odd, got " + std::to_string(kernel_size));
    }
    if (right_mask != kernel_size / 2) {
        throw ConfigError("causal branch must mask every future tap: right_mask " + std::to_string(right_mask) +
                          " for kernel size " + std::to_string(kernel_size));
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ConfigError("C2Conv lambda must lie in [0, 1]");
    }
    if (chunk_size == 0) {
        throw ConfigError("C2Conv chunk size must be positive");
    }
    if (depthwise.rank() != 2 || depthwise.rows() != kernel_size) {
        throw DimensionError("depthwise kernel " + shape_to_string(depthwise.shape()) + " for kernel size " +
                             std::to_string(kernel_size));
    }
}

C2Branches c2_branches(const Tensor &x, const C2ConvParams &params, const ChunkLayout &layout) {
    params.validate();
    if (layout.chunk_size != params.chunk_size) {
        throw ConfigError("C2Conv chunk size " + std::to_string(params.chunk_size) + " does not match layout W=" +
                          std::to_string(layout.chunk_size));
    }
    const BoolVec causal = params.causal_taps();
    const BoolVec chunked = params.chunked_taps();
    return {depthwise_conv_masked(x, params.depthwise, causal, PadPolicy::global()),
            depthwise_conv_masked(x, params.depthwise, chunked, PadPolicy::per_chunk(params.chunk_size))};
}

Tensor c2_blend(const C2Branches &branches, double lambda) {
    if (branches.causal.shape() != branches.chunked.shape()) {
        throw DimensionError("C2Conv branch shapes differ");
    }
    Tensor out(branches.causal.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = lambda * branches.chunked[i] + (1.0 - lambda) * branches.causal[i];
    }
    return out;
}

Tensor c2_depthwise(const Tensor &x, const C2ConvParams &params, const ChunkLayout &layout) {
    return c2_blend(c2_branches(x, params, layout), params.lambda);
}

Tensor conv_block_head(const Tensor &x, const C2ConvParams &params) {
    return glu(matmul(x, params.pointwise_in));
}

Tensor conv_block_tail(const Tensor &depthwise_out, const C2ConvParams &params) {
    const Tensor normed = layer_norm<double>(depthwise_out, params.norm_gain, params.norm_bias, params.eps);
    return matmul(swish(normed), params.pointwise_out);
}

Tensor conv_block(const Tensor &x, const C2ConvParams &params, const ChunkLayout &layout) {
    return conv_block_tail(c2_depthwise(conv_block_head(x, params), params, layout), params);
}

} // namespace sscformer
