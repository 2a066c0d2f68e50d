#include "sscformer/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace sscformer {

// ---------------------------------------------------------------------------
// Configuration

AttnKind EncoderConfig::block_kind(std::size_t block) const {
    if (chunk_only || block % 2 == 0) {
        return AttnKind::chunk;
    }
    return AttnKind::ssc;
}

void EncoderConfig::validate() const {
    if (input_dim == 0 || d_model == 0 || n_heads == 0 || block_pairs == 0 || chunk_size == 0 ||
        kernel_size == 0 || ff_expansion == 0) {
        throw ConfigError("encoder dimensions must all be positive");
    }
    if (d_model % n_heads != 0) {
        throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by " + std::to_string(n_heads) +
                          " heads");
    }
    if (kernel_size % 2 == 0) {
        throw ConfigError("kernel_size must be odd, got " + std::to_string(kernel_size));
    }
    if (right_mask != kernel_size / 2) {
        throw ConfigError("right_mask must equal (kernel_size - 1) / 2 = " + std::to_string(kernel_size / 2));
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ConfigError("lambda must lie in [0, 1]");
    }
    if (!(eps > 0.0)) {
        throw ConfigError("eps must be positive");
    }
}

namespace {

std::string trim(const std::string &s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::size_t parse_size(const std::string &v, std::size_t line) {
    std::size_t pos = 0;
    unsigned long long out = 0;
    try {
        out = std::stoull(v, &pos);
    } catch (const std::exception &) {
        throw ParseError("expected a non-negative integer, got '" + v + "'", line);
    }
    if (pos != v.size() || (!v.empty() && v.front() == '-')) {
        throw ParseError("expected a non-negative integer, got '" + v + "'", line);
    }
    return static_cast<std::size_t>(out);
}

double parse_real(const std::string &v, std::size_t line) {
    std::size_t pos = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception &) {
        throw ParseError("expected a real number, got '" + v + "'", line);
    }
    if (pos != v.size()) {
        throw ParseError("expected a real number, got '" + v + "'", line);
    }
    return out;
}

bool parse_bool(const std::string &v, std::size_t line) {
    if (v == "true" || v == "1") {
        return true;
    }
    if (v == "false" || v == "0") {
        return false;
    }
    throw ParseError("expected true/false, got '" + v + "'", line);
}

} // namespace

EncoderConfig parse_config(const std::string &text) {
    EncoderConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = trim(raw);
        if (s.empty() || s.front() == '#') {
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw ParseError("expected key=value", line);
        }
        const std::string key = trim(s.substr(0, eq));
        const std::string val = trim(s.substr(eq + 1));
        if (key == "input_dim") {
            cfg.input_dim = parse_size(val, line);
        } else if (key == "d_model") {
            cfg.d_model = parse_size(val, line);
        } else if (key == "n_heads") {
            cfg.n_heads = parse_size(val, line);
        } else if (key == "block_pairs") {
            cfg.block_pairs = parse_size(val, line);
        } else if (key == "chunk_size") {
            cfg.chunk_size = parse_size(val, line);
        } else if (key == "kernel_size") {
            cfg.kernel_size = parse_size(val, line);
        } else if (key == "right_mask") {
            cfg.right_mask = parse_size(val, line);
        } else if (key == "lambda") {
            cfg.lambda = parse_real(val, line);
        } else if (key == "ff_expansion") {
            cfg.ff_expansion = parse_size(val, line);
        } else if (key == "eps") {
            cfg.eps = parse_real(val, line);
        } else if (key == "seed") {
            cfg.seed = parse_size(val, line);
        } else if (key == "chunk_only") {
            cfg.chunk_only = parse_bool(val, line);
        } else if (key == "unmask_ssc") {
            cfg.unmask_ssc = parse_bool(val, line);
        } else {
            throw ParseError("unknown config key '" + key + "'", line);
        }
    }
    cfg.validate();
    return cfg;
}

EncoderConfig load_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string config_to_text(const EncoderConfig &c) {
    std::ostringstream os;
    os.precision(17);
    os << "input_dim=" << c.input_dim << '\n'
       << "d_model=" << c.d_model << '\n'
       << "n_heads=" << c.n_heads << '\n'
       << "block_pairs=" << c.block_pairs << '\n'
       << "chunk_size=" << c.chunk_size << '\n'
       << "kernel_size=" << c.kernel_size << '\n'
       << "right_mask=" << c.right_mask << '\n'
       << "lambda=" << c.lambda << '\n'
       << "ff_expansion=" << c.ff_expansion << '\n'
       << "eps=" << c.eps << '\n'
       << "seed=" << c.seed << '\n'
       << "chunk_only=" << (c.chunk_only ? "true" : "false") << '\n'
       << "unmask_ssc=" << (c.unmask_ssc ? "true" : "false") << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

LayerNormParams make_norm(std::size_t c) { return {std::vector<double>(c, 1.0), std::vector<double>(c, 0.0)}; }

MlpParams make_mlp(std::size_t c, std::size_t f) {
    return {Tensor::matrix(c, f), std::vector<double>(f, 0.0), Tensor::matrix(f, c), std::vector<double>(c, 0.0)};
}

EncoderParams make_skeleton(const EncoderConfig &cfg) {
    const std::size_t c = cfg.d_model;
    const std::size_t f = c * cfg.ff_expansion;
    EncoderParams p;
    p.input_proj = Tensor::matrix(cfg.input_dim, c);
    p.input_bias.assign(c, 0.0);
    for (std::size_t b = 0; b < cfg.num_blocks(); ++b) {
        BlockParams blk;
        blk.ln_ff1 = make_norm(c);
        blk.ff1 = make_mlp(c, f);
        blk.ln_att = make_norm(c);
        blk.attn.d_model = c;
        blk.attn.n_heads = cfg.n_heads;
        blk.attn.w_q = Tensor::matrix(c, c);
        blk.attn.w_k = Tensor::matrix(c, c);
        blk.attn.w_v = Tensor::matrix(c, c);
        blk.attn.w_o = Tensor::matrix(c, c);
        blk.ln_conv = make_norm(c);
        blk.conv.kernel_size = cfg.kernel_size;
        blk.conv.right_mask = cfg.right_mask;
        blk.conv.lambda = cfg.lambda;
        blk.conv.chunk_size = cfg.chunk_size;
        blk.conv.eps = cfg.eps;
        blk.conv.depthwise = Tensor::matrix(cfg.kernel_size, c);
        blk.conv.pointwise_in = Tensor::matrix(c, 2 * c);
        blk.conv.pointwise_out = Tensor::matrix(c, c);
        blk.conv.norm_gain.assign(c, 1.0);
        blk.conv.norm_bias.assign(c, 0.0);
        blk.ln_ff2 = make_norm(c);
        blk.ff2 = make_mlp(c, f);
        blk.ln_out = make_norm(c);
        p.blocks.push_back(std::move(blk));
    }
    return p;
}

using Visitor = std::function<void(const ParamView &)>;

void visit_tensor(const std::string &name, Tensor &t, std::size_t fan_in, const Visitor &fn) {
    fn({name, t.shape(), t.data(), fan_in});
}

void visit_vector(const std::string &name, std::vector<double> &v, std::size_t fan_in, const Visitor &fn) {
    fn({name, Shape{v.size()}, std::span<double>(v), fan_in});
}

void visit_norm(const std::string &name, LayerNormParams &ln, const Visitor &fn) {
    visit_vector(name + ".gain", ln.gain, 0, fn);
    visit_vector(name + ".bias", ln.bias, 0, fn);
}

void visit_mlp(const std::string &name, MlpParams &mlp, const Visitor &fn) {
    const std::size_t c = mlp.w1.rows();
    const std::size_t f = mlp.w2.rows();
    visit_tensor(name + ".w1", mlp.w1, c, fn);
    visit_vector(name + ".b1", mlp.b1, c, fn);
    visit_tensor(name + ".w2", mlp.w2, f, fn);
    visit_vector(name + ".b2", mlp.b2, f, fn);
}

} // namespace

void for_each_param(EncoderParams &params, const std::function<void(const ParamView &)> &fn) {
    const std::size_t c_in = params.input_proj.rows();
    visit_tensor("input_proj", params.input_proj, c_in, fn);
    visit_vector("input_bias", params.input_bias, c_in, fn);
    for (std::size_t b = 0; b < params.blocks.size(); ++b) {
        BlockParams &blk = params.blocks[b];
        const std::string pre = "blocks." + std::to_string(b);
        const std::size_t c = blk.attn.d_model;
        visit_norm(pre + ".ln_ff1", blk.ln_ff1, fn);
        visit_mlp(pre + ".ff1", blk.ff1, fn);
        visit_norm(pre + ".ln_att", blk.ln_att, fn);
        visit_tensor(pre + ".attn.w_q", blk.attn.w_q, c, fn);
        visit_tensor(pre + ".attn.w_k", blk.attn.w_k, c, fn);
        visit_tensor(pre + ".attn.w_v", blk.attn.w_v, c, fn);
        visit_tensor(pre + ".attn.w_o", blk.attn.w_o, c, fn);
        visit_norm(pre + ".ln_conv", blk.ln_conv, fn);
        visit_tensor(pre + ".conv.pointwise_in", blk.conv.pointwise_in, c, fn);
        visit_tensor(pre + ".conv.depthwise", blk.conv.depthwise, blk.conv.kernel_size, fn);
        visit_vector(pre + ".conv.norm.gain", blk.conv.norm_gain, 0, fn);
        visit_vector(pre + ".conv.norm.bias", blk.conv.norm_bias, 0, fn);
        visit_tensor(pre + ".conv.pointwise_out", blk.conv.pointwise_out, c, fn);
        visit_norm(pre + ".ln_ff2", blk.ln_ff2, fn);
        visit_mlp(pre + ".ff2", blk.ff2, fn);
        visit_norm(pre + ".ln_out", blk.ln_out, fn);
    }
}

void for_each_param(const EncoderParams &params, const std::function<void(const ParamView &)> &fn) {
    // The visitor contract is read-only for const parameters.
    for_each_param(const_cast<EncoderParams &>(params), fn);
}

EncoderParams init_encoder(const EncoderConfig &config) {
    config.validate();
    EncoderParams params = make_skeleton(config);
    std::mt19937_64 rng(config.seed);
    for_each_param(params, [&](const ParamView &p) {
        if (p.fan_in == 0) {
            return; // layer norms keep unit gain / zero bias
        }
        const double bound = 1.0 / std::sqrt(static_cast<double>(p.fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double &v : p.values) {
            v = dist(rng);
        }
    });
    return params;
}

std::uint64_t param_checksum(const EncoderParams &params) {
    std::uint64_t h = 14695981039346656037ULL;
    for_each_param(params, [&](const ParamView &p) {
        for (double v : p.values) {
            unsigned char bytes[sizeof(double)];
            std::memcpy(bytes, &v, sizeof(double));
            for (unsigned char byte : bytes) {
                h ^= byte;
                h *= 1099511628211ULL;
            }
        }
    });
    return h;
}

void save_checkpoint(const EncoderParams &params, const std::string &path) {
    static_assert(sizeof(double) == 8);
    std::ofstream blob(path, std::ios::binary);
    std::ofstream manifest(path + ".manifest");
    if (!blob || !manifest) {
        throw std::runtime_error("cannot write checkpoint " + path);
    }
    manifest << "# sscformer checkpoint: float64 little-endian, arrays in order\n";
    for_each_param(params, [&](const ParamView &p) {
        manifest << p.name;
        for (std::size_t extent : p.shape) {
            manifest << ' ' << extent;
        }
        manifest << '\n';
        blob.write(reinterpret_cast<const char *>(p.values.data()),
                   static_cast<std::streamsize>(p.values.size() * sizeof(double)));
    });
    if (!blob || !manifest) {
        throw std::runtime_error("short write to checkpoint " + path);
    }
}

EncoderParams load_checkpoint(const std::string &path, const EncoderConfig &config) {
    config.validate();
    EncoderParams params = make_skeleton(config);
    std::ifstream blob(path, std::ios::binary);
    std::ifstream manifest(path + ".manifest");
    if (!blob || !manifest) {
        throw std::runtime_error("cannot open checkpoint " + path);
    }
    std::vector<std::pair<std::string, Shape>> entries;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(manifest, raw)) {
        ++line;
        if (raw.empty() || raw.front() == '#') {
            continue;
        }
        std::istringstream ls(raw);
        std::string name;
        ls >> name;
        Shape shape;
        std::size_t extent = 0;
        while (ls >> extent) {
            shape.push_back(extent);
        }
        if (!ls.eof()) {
            throw ParseError("malformed manifest entry", line);
        }
        entries.emplace_back(name, shape);
    }
    std::size_t index = 0;
    for_each_param(params, [&](const ParamView &p) {
        if (index >= entries.size() || entries[index].first != p.name || entries[index].second != p.shape) {
            throw DimensionError("checkpoint manifest does not match config at '" + p.name + "' " +
                                 shape_to_string(p.shape));
        }
        ++index;
        blob.read(reinterpret_cast<char *>(p.values.data()),
                  static_cast<std::streamsize>(p.values.size() * sizeof(double)));
        if (!blob) {
            throw DimensionError("checkpoint blob ends early at '" + p.name + "'");
        }
    });
    if (index != entries.size() || blob.peek() != std::char_traits<char>::eof()) {
        throw DimensionError("checkpoint has more data than the config describes");
    }
    return params;
}

// ---------------------------------------------------------------------------
// Forward pass

Tensor mlp_forward(const Tensor &x, const MlpParams &mlp) {
    Tensor hidden = matmul(x, mlp.w1);
    add_row_bias<double>(hidden, mlp.b1);
    Tensor out = matmul(swish(hidden), mlp.w2);
    add_row_bias<double>(out, mlp.b2);
    return out;
}

void add_position_encoding(Tensor &x, std::size_t first_position) {
    const std::size_t c = x.cols();
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto pos = static_cast<double>(first_position + r);
        auto row = x.row(r);
        for (std::size_t i = 0; i < c; ++i) {
            const double pair = static_cast<double>(i - i % 2);
            const double angle = pos / std::pow(10000.0, pair / static_cast<double>(c));
            row[i] += i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
}

void zero_padding_rows(Tensor &x, std::size_t valid_len) {
    for (std::size_t r = valid_len; r < x.rows(); ++r) {
        auto row = x.row(r);
        std::fill(row.begin(), row.end(), 0.0);
    }
}

namespace {

Tensor normed_input(const Tensor &x, const LayerNormParams &ln, double eps, std::size_t valid_len) {
    Tensor out = layer_norm<double>(x, ln.gain, ln.bias, eps);
    zero_padding_rows(out, valid_len);
    return out;
}

// x + scale * m
Tensor add_scaled(const Tensor &x, const Tensor &m, double scale) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x[i] + scale * m[i];
    }
    return out;
}

Tensor block_tail(const Tensor &conv_in, const BlockParams &blk, double eps, std::size_t valid_len) {
    const Tensor ff = mlp_forward(normed_input(conv_in, blk.ln_ff2, eps, valid_len), blk.ff2);
    Tensor out = layer_norm<double>(add_scaled(conv_in, ff, 0.5), blk.ln_out.gain, blk.ln_out.bias, eps);
    zero_padding_rows(out, valid_len);
    return out;
}

Tensor block_head(const Tensor &z, const BlockParams &blk, double eps, std::size_t valid_len) {
    return add_scaled(z, mlp_forward(normed_input(z, blk.ln_ff1, eps, valid_len), blk.ff1), 0.5);
}

Tensor embed(const Tensor &frames, const EncoderParams &params, std::size_t first_position, std::size_t valid_rows) {
    Tensor h = matmul(frames, params.input_proj);
    add_row_bias<double>(h, params.input_bias);
    add_position_encoding(h, first_position);
    zero_padding_rows(h, valid_rows);
    return h;
}

} // namespace

Tensor block_forward(const Tensor &z, const BlockParams &block, AttnKind kind, const AttnMask &mask) {
    if (mask.kind() != kind) {
        throw ConfigError("block of kind " + std::string(to_string(kind)) + " given a " +
                          std::string(to_string(mask.kind())) + " mask");
    }
    const double eps = block.conv.eps;
    const std::size_t valid = mask.valid_len();
    const Tensor a = block_head(z, block, eps, valid);
    const Tensor att = mhsa(normed_input(a, block.ln_att, eps, valid), block.attn, mask).output;
    const Tensor b = add_scaled(a, att, 1.0);
    const Tensor conv = conv_block(normed_input(b, block.ln_conv, eps, valid), block.conv, mask.layout());
    const Tensor c = add_scaled(b, conv, 1.0);
    return block_tail(c, block, eps, valid);
}

AttnMask encoder_mask(const EncoderConfig &config, AttnKind kind, const ChunkLayout &layout, std::size_t valid_len) {
    if (kind == AttnKind::ssc && config.unmask_ssc) {
        const SamplingPlan plan = make_sampling_plan(layout);
        AttnMask mask(AttnKind::ssc, layout, valid_len);
        const std::size_t w = layout.chunk_size;
        for (std::size_t q = 0; q < valid_len; ++q) {
            for (std::size_t k = 0; k < valid_len; ++k) {
                mask.set(q, k, plan.scatter[q] / w == plan.scatter[k] / w);
            }
        }
        return mask;
    }
    return build_mask(kind, layout, valid_len);
}

Tensor encoder_forward(const Tensor &x, const EncoderParams &params, const EncoderConfig &config,
                       std::size_t valid_len) {
    config.validate();
    if (x.rank() != 2 || x.cols() != config.input_dim) {
        throw DimensionError("encoder input " + shape_to_string(x.shape()) + ", expected width " +
                             std::to_string(config.input_dim));
    }
    if (valid_len == 0 || valid_len > x.rows()) {
        throw DimensionError("valid length " + std::to_string(valid_len) + " for " + std::to_string(x.rows()) +
                             " input rows");
    }
    if (params.blocks.size() != config.num_blocks()) {
        throw DimensionError("parameters hold " + std::to_string(params.blocks.size()) + " blocks, config wants " +
                             std::to_string(config.num_blocks()));
    }
    const ChunkLayout layout = make_layout(x.rows(), config.chunk_size);
    Tensor padded = Tensor::matrix(layout.padded_len, config.input_dim);
    std::copy(x.data().begin(), x.data().end(), padded.data().begin());

    Tensor h = embed(padded, params, 0, valid_len);
    const AttnMask chunk = encoder_mask(config, AttnKind::chunk, layout, valid_len);
    std::optional<AttnMask> ssc;
    if (!config.chunk_only) {
        ssc = encoder_mask(config, AttnKind::ssc, layout, valid_len);
    }
    for (std::size_t b = 0; b < params.blocks.size(); ++b) {
        const AttnKind kind = config.block_kind(b);
        h = block_forward(h, params.blocks[b], kind, kind == AttnKind::ssc ? *ssc : chunk);
    }
    return h;
}

Tensor encoder_forward(const Tensor &x, const EncoderParams &params, const EncoderConfig &config) {
    return encoder_forward(x, params, config, x.rows());
}

// ---------------------------------------------------------------------------
// Streaming

std::string_view to_string(StreamMode mode) { return mode == StreamMode::recompute ? "recompute" : "cached"; }

StreamMode parse_stream_mode(std::string_view name) {
    if (name == "recompute") {
        return StreamMode::recompute;
    }
    if (name == "cached") {
        return StreamMode::cached;
    }
    throw ConfigError("unknown stream mode '" + std::string(name) + "'");
}

EncoderStream::EncoderStream(const EncoderParams &params, EncoderConfig config, StreamMode mode)
    : params_(params), config_(std::move(config)), mode_(mode), caches_(config_.num_blocks()) {
    config_.validate();
    if (params_.blocks.size() != config_.num_blocks()) {
        throw DimensionError("parameters hold " + std::to_string(params_.blocks.size()) + " blocks, config wants " +
                             std::to_string(config_.num_blocks()));
    }
}

Tensor EncoderStream::push(const Tensor &frames) {
    if (closed_) {
        throw StateError("push after flush");
    }
    if (frames.rank() != 2 || frames.rows() != config_.chunk_size || frames.cols() != config_.input_dim) {
        throw DimensionError("push expects " + std::to_string(config_.chunk_size) + "x" +
                             std::to_string(config_.input_dim) + " frames, got " + shape_to_string(frames.shape()));
    }
    return emit(frames, frames.rows());
}

Tensor EncoderStream::flush() {
    if (closed_) {
        throw StateError("flush after flush");
    }
    closed_ = true;
    return {};
}

Tensor EncoderStream::flush(const Tensor &frames) {
    if (frames.empty()) {
        return flush();
    }
    if (closed_) {
        throw StateError("flush after flush");
    }
    if (frames.rank() != 2 || frames.rows() >= config_.chunk_size || frames.cols() != config_.input_dim) {
        throw DimensionError("flush expects fewer than " + std::to_string(config_.chunk_size) + " frames of width " +
                             std::to_string(config_.input_dim) + ", got " + shape_to_string(frames.shape()));
    }
    Tensor out = emit(frames, frames.rows());
    closed_ = true;
    return out;
}

Tensor EncoderStream::emit(const Tensor &frames, std::size_t valid_rows) {
    const std::size_t w = config_.chunk_size;
    const std::size_t begin = chunks_emitted_ * w;
    Tensor out;
    if (mode_ == StreamMode::recompute) {
        frame_buffer_.insert(frame_buffer_.end(), frames.data().begin(), frames.data().end());
        const std::size_t total = begin + valid_rows;
        const Tensor prefix(Shape{total, config_.input_dim}, frame_buffer_);
        out = encoder_forward(prefix, params_, config_, total).slice_rows(begin, total);
    } else {
        Tensor chunk = Tensor::matrix(w, config_.input_dim);
        std::copy(frames.data().begin(), frames.data().end(), chunk.data().begin());
        out = run_cached(std::move(chunk), valid_rows);
    }
    frames_received_ += valid_rows;
    ++chunks_emitted_;
    return out;
}

Tensor EncoderStream::run_cached(Tensor chunk, std::size_t valid_rows) {
    Tensor h = embed(chunk, params_, chunks_emitted_ * config_.chunk_size, valid_rows);
    for (std::size_t layer = 0; layer < params_.blocks.size(); ++layer) {
        h = cached_block(h, layer, valid_rows);
    }
    return h.slice_rows(0, valid_rows);
}

Tensor EncoderStream::cached_block(const Tensor &z, std::size_t layer, std::size_t valid_rows) {
    const BlockParams &blk = params_.blocks[layer];
    LayerCache &cache = caches_[layer];
    const AttnKind kind = config_.block_kind(layer);
    const double eps = config_.eps;
    const std::size_t w = config_.chunk_size;
    const std::size_t c = config_.d_model;
    const std::size_t chunk = chunks_emitted_;
    const std::size_t valid_total = chunk * w + valid_rows;

    const Tensor a = block_head(z, blk, eps, valid_rows);

    // Attention over the new chunk.
    const Tensor n = normed_input(a, blk.ln_att, eps, valid_rows);
    const Tensor q = matmul(n, blk.attn.w_q);
    const Tensor k = matmul(n, blk.attn.w_k);
    const Tensor v = matmul(n, blk.attn.w_v);
    MacCount macs;
    Tensor ctx = Tensor::matrix(w, c);
    if (kind == AttnKind::chunk) {
        BoolVec admit(w * w, 0);
        for (std::size_t i = 0; i < valid_rows; ++i) {
            for (std::size_t j = 0; j < valid_rows; ++j) {
                admit[i * w + j] = 1;
            }
        }
        ctx = attend_block(q, k, v, std::span<const std::uint8_t>(admit), blk.attn.n_heads, macs);
    } else {
        cache.keys.insert(cache.keys.end(), k.data().begin(), k.data().end());
        cache.values.insert(cache.values.end(), v.data().begin(), v.data().end());
        // With chunk+1 chunks seen, sampled chunk r holds positions r, r+Cn, ...
        // All of them lie in the current or earlier chunks, so every valid one
        // is admissible for a query of the newest chunk.
        const std::size_t interval = chunk + 1;
        for (std::size_t r = 0; r < interval; ++r) {
            std::vector<std::size_t> queries;
            for (std::size_t i = 0; i < w; ++i) {
                if ((chunk * w + i) % interval == r) {
                    queries.push_back(i);
                }
            }
            if (queries.empty()) {
                continue;
            }
            Tensor qs = Tensor::matrix(queries.size(), c);
            for (std::size_t i = 0; i < queries.size(); ++i) {
                std::copy(q.row(queries[i]).begin(), q.row(queries[i]).end(), qs.row(i).begin());
            }
            Tensor ks = Tensor::matrix(w, c);
            Tensor vs = Tensor::matrix(w, c);
            BoolVec admit(queries.size() * w, 0);
            for (std::size_t m = 0; m < w; ++m) {
                const std::size_t pos = r + m * interval;
                std::copy_n(cache.keys.begin() + static_cast<std::ptrdiff_t>(pos * c), c, ks.row(m).begin());
                std::copy_n(cache.values.begin() + static_cast<std::ptrdiff_t>(pos * c), c, vs.row(m).begin());
                for (std::size_t i = 0; i < queries.size(); ++i) {
                    admit[i * w + m] = (chunk * w + queries[i] < valid_total && pos < valid_total) ? 1 : 0;
                }
            }
            const Tensor out = attend_block(qs, ks, vs, std::span<const std::uint8_t>(admit), blk.attn.n_heads, macs);
            for (std::size_t i = 0; i < queries.size(); ++i) {
                std::copy(out.row(i).begin(), out.row(i).end(), ctx.row(queries[i]).begin());
            }
        }
    }
    const Tensor b = add_scaled(a, matmul(ctx, blk.attn.w_o), 1.0);

    // C2Conv: the causal branch reads up to right_mask rows of earlier chunks.
    const Tensor head = conv_block_head(normed_input(b, blk.ln_conv, eps, valid_rows), blk.conv);
    const std::size_t left = cache.conv_left.empty() ? 0 : cache.conv_left.rows();
    Tensor window = Tensor::matrix(left + w, c);
    if (left > 0) {
        std::copy(cache.conv_left.data().begin(), cache.conv_left.data().end(), window.data().begin());
    }
    std::copy(head.data().begin(), head.data().end(),
              window.data().begin() + static_cast<std::ptrdiff_t>(left * c));
    C2Branches branches;
    branches.causal =
        depthwise_conv_masked(window, blk.conv.depthwise, blk.conv.causal_taps(), PadPolicy::global())
            .slice_rows(left, left + w);
    branches.chunked = depthwise_conv_masked(head, blk.conv.depthwise, blk.conv.chunked_taps(), PadPolicy::per_chunk(w));
    const Tensor conv = conv_block_tail(c2_blend(branches, blk.conv.lambda), blk.conv);
    const std::size_t keep = std::min(config_.right_mask, left + w);
    cache.conv_left = keep == 0 ? Tensor{} : window.slice_rows(left + w - keep, left + w);

    return block_tail(add_scaled(b, conv, 1.0), blk, eps, valid_rows);
}

// ---------------------------------------------------------------------------
// Reachability

Reachability::Reachability(std::size_t n, bool diagonal) : n_(n), bits_(n * n, 0) {
    if (diagonal) {
        for (std::size_t i = 0; i < n; ++i) {
            set(i, i);
        }
    }
}

Reachability Reachability::after(const Reachability &first) const {
    if (first.n_ != n_) {
        throw DimensionError("reachability sizes differ");
    }
    Reachability out(n_);
    for (std::size_t t = 0; t < n_; ++t) {
        for (std::size_t m = 0; m < n_; ++m) {
            if (!at(t, m)) {
                continue;
            }
            for (std::size_t j = 0; j < n_; ++j) {
                out.bits_[t * n_ + j] |= first.bits_[m * n_ + j];
            }
        }
    }
    return out;
}

Reachability Reachability::unite(const Reachability &other) const {
    if (other.n_ != n_) {
        throw DimensionError("reachability sizes differ");
    }
    Reachability out = *this;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        out.bits_[i] |= other.bits_[i];
    }
    return out;
}

bool Reachability::contains(const Reachability &other) const {
    if (other.n_ != n_) {
        throw DimensionError("reachability sizes differ");
    }
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (other.bits_[i] && !bits_[i]) {
            return false;
        }
    }
    return true;
}

std::size_t Reachability::count() const {
    std::size_t n = 0;
    for (auto b : bits_) {
        n += b;
    }
    return n;
}

Reachability block_reachability(const EncoderConfig &config, AttnKind kind, const ChunkLayout &layout,
                                std::size_t valid_len) {
    const std::size_t n = layout.padded_len;
    const AttnMask mask = encoder_mask(config, kind, layout, valid_len);
    Reachability attn(n, true);
    Reachability conv(n, true);
    const auto reach = static_cast<std::ptrdiff_t>(config.kernel_size / 2);
    for (std::size_t t = 0; t < valid_len; ++t) {
        for (std::size_t j = 0; j < valid_len; ++j) {
            if (mask.allows(t, j)) {
                attn.set(t, j);
            }
            const auto d = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(t);
            const bool causal = d <= 0 && d >= -reach;
            const bool chunked = layout.chunk_index(t) == layout.chunk_index(j) && d >= -reach && d <= reach;
            if (causal || chunked) {
                conv.set(t, j);
            }
        }
    }
    return conv.after(attn);
}

Reachability encoder_reachability(const EncoderConfig &config, const ChunkLayout &layout, std::size_t valid_len,
                                  std::optional<std::size_t> blocks) {
    const std::size_t count = blocks.value_or(config.num_blocks());
    Reachability total(layout.padded_len, true);
    std::optional<Reachability> chunk_step;
    std::optional<Reachability> ssc_step;
    for (std::size_t b = 0; b < count; ++b) {
        const AttnKind kind = config.block_kind(b);
        auto &step = kind == AttnKind::ssc ? ssc_step : chunk_step;
        if (!step) {
            step = block_reachability(config, kind, layout, valid_len);
        }
        total = step->after(total);
    }
    return total;
}

} // namespace sscformer
