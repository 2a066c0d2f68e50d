#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sscformer/attention.hpp"
#include "sscformer/c2conv.hpp"
#include "sscformer/masks.hpp"

namespace sscformer {

struct EncoderConfig {
    std::size_t input_dim = 80;
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t block_pairs = 6; // each pair is a chunk block followed by an ssc block
    std::size_t chunk_size = 16;
    std::size_t kernel_size = 15;
    std::size_t right_mask = 7;
    double lambda = 0.7;
    std::size_t ff_expansion = 4;
    double eps = 1e-5;
    std::uint64_t seed = 0;
    // Every block uses regular chunk attention.
    bool chunk_only = false;
    // Test hook: ssc blocks drop the chunk-causality condition and attend to
    // the whole sampled chunk, leaking future chunks.
    bool unmask_ssc = false;

    std::size_t num_blocks() const { return 2 * block_pairs; }
    AttnKind block_kind(std::size_t block) const;
    void validate() const;

    bool operator==(const EncoderConfig &) const = default;
};

// key=value lines, '#' comments; keys are the field names above.
EncoderConfig parse_config(const std::string &text);
EncoderConfig load_config(const std::string &path);
std::string config_to_text(const EncoderConfig &config);

struct LayerNormParams {
    std::vector<double> gain;
    std::vector<double> bias;
};

struct MlpParams {
    Tensor w1; // [C x F]
    std::vector<double> b1;
    Tensor w2; // [F x C]
    std::vector<double> b2;
};

struct BlockParams {
    LayerNormParams ln_ff1;
    MlpParams ff1;
    LayerNormParams ln_att;
    MhsaParams<double> attn;
    LayerNormParams ln_conv;
    C2ConvParams conv;
    LayerNormParams ln_ff2;
    MlpParams ff2;
    LayerNormParams ln_out;
};

struct EncoderParams {
    Tensor input_proj; // [C_in x C]
    std::vector<double> input_bias;
    std::vector<BlockParams> blocks;
};

// Every parameter array in a fixed order. fan_in is 0 for layer-norm entries.
struct ParamView {
    std::string name;
    Shape shape;
    std::span<double> values;
    std::size_t fan_in;
};
void for_each_param(EncoderParams &params, const std::function<void(const ParamView &)> &fn);
void for_each_param(const EncoderParams &params, const std::function<void(const ParamView &)> &fn);

// Uniform in +-1/sqrt(fan_in) from the config seed; layer norms start at
// unit gain and zero bias.
EncoderParams init_encoder(const EncoderConfig &config);

// FNV-1a over the raw parameter bytes.
std::uint64_t param_checksum(const EncoderParams &params);

// Flat little-endian float64 blob at `path` plus `path`.manifest listing
// "name dim..." per array in storage order.
void save_checkpoint(const EncoderParams &params, const std::string &path);
EncoderParams load_checkpoint(const std::string &path, const EncoderConfig &config);

Tensor mlp_forward(const Tensor &x, const MlpParams &mlp);

// Adds the sinusoidal absolute position encoding for positions first, first+1, ...
void add_position_encoding(Tensor &x, std::size_t first_position);

// Zeroes rows [valid_len, rows).
void zero_padding_rows(Tensor &x, std::size_t valid_len);

/// One Conformer block with half-step feed-forward modules:
///   a = x + 0.5 * mlp1(ln(x))
///   b = a + mhsa(ln(a))
///   c = b + c2conv(ln(b))
///   y = ln(c + 0.5 * mlp2(ln(c)))
/// Module inputs and the output have their padded rows zeroed. The mask kind
/// must equal `kind`.
Tensor block_forward(const Tensor &z, const BlockParams &block, AttnKind kind, const AttnMask &mask);

// Mask actually used by block `kind` (honours the unmask_ssc hook).
AttnMask encoder_mask(const EncoderConfig &config, AttnKind kind, const ChunkLayout &layout, std::size_t valid_len);

/// Full encoder over x[L x C_in]; rows at or after valid_len are padding.
/// Returns [Lp x C] with padded rows zeroed.
Tensor encoder_forward(const Tensor &x, const EncoderParams &params, const EncoderConfig &config,
                       std::size_t valid_len);
Tensor encoder_forward(const Tensor &x, const EncoderParams &params, const EncoderConfig &config);

enum class StreamMode { recompute, cached };

std::string_view to_string(StreamMode mode);
StreamMode parse_stream_mode(std::string_view name);

/// Chunk-by-chunk inference over a growing utterance.
///
/// recompute: keeps every frame and reruns the offline encoder on the whole
/// prefix at each push; the sampling interval is the number of chunks seen.
/// cached: runs each layer on the new chunk only, reusing per-layer left
/// context of the depthwise convolution and the keys/values that earlier
/// pushes computed for ssc layers.
class EncoderStream {
  public:
    EncoderStream(const EncoderParams &params, EncoderConfig config, StreamMode mode);

    // Exactly chunk_size frames; returns chunk_size output rows.
    Tensor push(const Tensor &frames);

    // Fewer than chunk_size frames; returns one row per frame and closes the
    // stream. Zero frames return an empty tensor.
    Tensor flush(const Tensor &frames);
    Tensor flush();

    std::size_t chunks_emitted() const noexcept { return chunks_emitted_; }
    std::size_t frames_received() const noexcept { return frames_received_; }
    bool closed() const noexcept { return closed_; }
    StreamMode mode() const noexcept { return mode_; }

  private:
    struct LayerCache {
        Tensor conv_left;            // up to right_mask rows of conv input history
        std::vector<double> keys;    // row-major [frames x C], ssc layers only
        std::vector<double> values;
    };

    Tensor emit(const Tensor &frames, std::size_t valid_rows);
    Tensor run_cached(Tensor chunk, std::size_t valid_rows);
    Tensor cached_block(const Tensor &z, std::size_t layer, std::size_t valid_rows);

    const EncoderParams &params_;
    EncoderConfig config_;
    StreamMode mode_;
    std::vector<double> frame_buffer_;
    std::vector<LayerCache> caches_;
    std::size_t frames_received_ = 0;
    std::size_t chunks_emitted_ = 0;
    bool closed_ = false;
};

// Square boolean relation: at(t, j) means output t may depend on input j.
class Reachability {
  public:
    explicit Reachability(std::size_t n, bool diagonal = false);

    std::size_t size() const noexcept { return n_; }
    bool at(std::size_t t, std::size_t j) const { return bits_[t * n_ + j] != 0; }
    void set(std::size_t t, std::size_t j, bool v = true) { bits_[t * n_ + j] = v ? 1 : 0; }

    // (this after first)(t, j) = exists m: this(t, m) and first(m, j).
    Reachability after(const Reachability &first) const;
    Reachability unite(const Reachability &other) const;
    bool contains(const Reachability &other) const;
    std::size_t count() const;

    bool operator==(const Reachability &) const = default;

  private:
    std::size_t n_;
    BoolVec bits_;
};

// Per-layer dependency relations of one block, composed.
Reachability block_reachability(const EncoderConfig &config, AttnKind kind, const ChunkLayout &layout,
                                std::size_t valid_len);

// Composition over the whole stack (first `blocks` blocks, or all).
Reachability encoder_reachability(const EncoderConfig &config, const ChunkLayout &layout, std::size_t valid_len,
                                  std::optional<std::size_t> blocks = std::nullopt);

} // namespace sscformer
