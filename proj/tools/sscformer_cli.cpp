// sscformer: benchmarks, mask dumps, causality probes and streaming demos for
// the chunk/sampled-chunk streaming encoder.
//
// Exit codes: 0 ok, 1 property violation, 2 usage error.

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"

#include "sscformer/bench.hpp"
#include "sscformer/encoder.hpp"
#include "sscformer/frames_io.hpp"
#include "sscformer/masks.hpp"
#include "sscformer/probe.hpp"

using namespace sscformer;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitUsage = 2;

struct ConfigFlags {
    std::string config_path;
    EncoderConfig overrides;
    std::uint64_t seed = 0;
    bool chunk_only = false;
    bool unmask_ssc = false;

    CLI::Option *chunk_size = nullptr;
    CLI::Option *d_model = nullptr;
    CLI::Option *heads = nullptr;
    CLI::Option *pairs = nullptr;
    CLI::Option *lambda = nullptr;
    CLI::Option *kernel = nullptr;
    CLI::Option *input_dim = nullptr;
    CLI::Option *seed_opt = nullptr;

    void attach(CLI::App *app) {
        app->add_option("--config", config_path, "key=value encoder config file")->check(CLI::ExistingFile);
        chunk_size = app->add_option("--chunk-size", overrides.chunk_size, "tokens per chunk (W)");
        d_model = app->add_option("--d-model", overrides.d_model, "model width (C)");
        heads = app->add_option("--heads", overrides.n_heads, "attention heads");
        pairs = app->add_option("--pairs", overrides.block_pairs, "chunk+ssc block pairs");
        lambda = app->add_option("--lambda", overrides.lambda, "chunked-convolution weight");
        kernel = app->add_option("--kernel", overrides.kernel_size, "C2Conv kernel size (odd)");
        input_dim = app->add_option("--input-dim", overrides.input_dim, "input frame width");
        seed_opt = app->add_option("--seed", seed, "parameter / input seed");
        app->add_flag("--chunk-only", chunk_only, "use regular chunk attention in every block");
        app->add_flag("--unmask-ssc", unmask_ssc, "negative control: drop chunk causality in ssc blocks");
    }

    EncoderConfig resolve() const {
        EncoderConfig cfg = config_path.empty() ? EncoderConfig{} : load_config(config_path);
        if (*chunk_size) cfg.chunk_size = overrides.chunk_size;
        if (*d_model) cfg.d_model = overrides.d_model;
        if (*heads) cfg.n_heads = overrides.n_heads;
        if (*pairs) cfg.block_pairs = overrides.block_pairs;
        if (*lambda) cfg.lambda = overrides.lambda;
        if (*kernel) {
            cfg.kernel_size = overrides.kernel_size;
            cfg.right_mask = overrides.kernel_size / 2;
        }
        if (*input_dim) cfg.input_dim = overrides.input_dim;
        if (*seed_opt) cfg.seed = seed;
        cfg.chunk_only = cfg.chunk_only || chunk_only;
        cfg.unmask_ssc = cfg.unmask_ssc || unmask_ssc;
        cfg.validate();
        return cfg;
    }
};

// Writes to --out when given, stdout otherwise.
class Output {
  public:
    explicit Output(const std::string &path) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) {
                throw std::runtime_error("cannot write " + path);
            }
        }
    }
    std::ostream &stream() { return file_.is_open() ? file_ : std::cout; }

  private:
    std::ofstream file_;
};

Tensor random_frames(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> dist(0.0, 1.0);
    Tensor x = Tensor::matrix(rows, cols);
    for (double &v : x.data()) {
        v = dist(rng);
    }
    return x;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
    std::vector<std::string> kinds{"chunk", "ssc", "time_restricted", "global"};
    std::vector<std::size_t> lengths;
    std::size_t base = 64;
    std::size_t multiples = 8;
    std::size_t repeats = 3;
    int precision = 32;
    bool parallel = false;
    std::string out;
    std::string summary_out;
};

int cmd_bench(const BenchArgs &args, const ConfigFlags &flags) {
    const EncoderConfig cfg = flags.resolve();
    BenchOptions opt;
    opt.kinds.clear();
    for (const auto &k : args.kinds) {
        opt.kinds.push_back(parse_attn_kind(k));
    }
    opt.lengths = args.lengths.empty() ? scaled_lengths(args.base, args.multiples) : args.lengths;
    opt.chunk_size = cfg.chunk_size;
    opt.d_model = cfg.d_model;
    opt.n_heads = cfg.n_heads;
    opt.repeats = args.repeats;
    opt.seed = cfg.seed;
    opt.single_precision = args.precision == 32;
    opt.parallel_cells = args.parallel;

    const auto records = run_bench(opt);
    Output out(args.out);
    out.stream() << bench_csv_header() << '\n';
    int status = kExitOk;
    for (const auto &r : records) {
        out.stream() << bench_csv_row(r) << '\n';
        const bool exact_kind = r.kind == AttnKind::chunk || r.kind == AttnKind::ssc;
        if (exact_kind && r.measured_macs != r.predicted_macs) {
            std::cerr << "MAC mismatch: " << bench_csv_row(r) << '\n';
            status = kExitViolation;
        }
    }
    const auto summaries = summarize_bench(records);
    for (const auto &s : summaries) {
        if (s.time.coef.empty()) {
            std::cerr << "# " << to_string(s.kind) << " " << s.model << " fit: not enough lengths\n";
            continue;
        }
        std::cerr << "# " << to_string(s.kind) << " " << s.model << " fit: MAC r2=" << s.macs.r2
                  << " time r2=" << s.time.r2;
        if (s.model == "linear" && s.time.coef.size() > 1) {
            std::cerr << " slope=" << s.time.coef[1] << " s/token";
        } else if (s.time.coef.size() > 2) {
            std::cerr << " quad_coef=" << s.time.coef[2] << " quad_share=" << s.quadratic_share;
        }
        std::cerr << '\n';
    }
    if (!args.summary_out.empty()) {
        std::ofstream js(args.summary_out);
        js << summary_to_json(summaries) << '\n';
    }
    return status;
}

// ---------------------------------------------------------------------------

struct MaskArgs {
    std::string kind = "ssc";
    std::size_t length = 12;
    std::size_t chunk_size = 4;
    std::size_t valid_len = 0;
    std::string out;
};

int cmd_mask_dump(const MaskArgs &args) {
    const ChunkLayout layout = make_layout(args.length, args.chunk_size);
    const std::size_t valid = args.valid_len == 0 ? args.length : args.valid_len;
    const AttnMask mask = build_mask(parse_attn_kind(args.kind), layout, valid);
    Output out(args.out);
    out.stream() << mask.to_text();
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct ProbeArgs {
    std::size_t length = 32;
    std::string mode = "offline";
    double delta = 1e-3;
    std::string out;
};

int cmd_probe(const ProbeArgs &args, const ConfigFlags &flags) {
    const EncoderConfig cfg = flags.resolve();
    const ProbeMode mode = parse_probe_mode(args.mode);
    if (args.length == 0 || args.length % cfg.chunk_size != 0) {
        throw ConfigError("probe length must be a positive multiple of the chunk size");
    }
    const EncoderParams params = init_encoder(cfg);
    const Tensor x = random_frames(args.length, cfg.input_dim, cfg.seed);
    const ProbeReport report = probe_causality(x, params, cfg, mode, args.delta);

    Output out(args.out);
    auto &os = out.stream();
    os << "mode=" << to_string(mode) << " L=" << args.length << " W=" << cfg.chunk_size
       << " blocks=" << cfg.num_blocks() << " observed_pairs=" << report.observed.count()
       << " leaks=" << report.leaks.size();
    if (mode == ProbeMode::offline) {
        os << " unexplained=" << report.unexplained.size()
           << " forbidden_in_closure=" << report.forbidden_in_closure;
    }
    os << '\n';
    for (const auto &[t, j] : report.leaks) {
        os << "leak output=" << t << " input=" << j << '\n';
    }
    for (const auto &[t, j] : report.unexplained) {
        os << "unexplained output=" << t << " input=" << j << '\n';
    }
    os << (report.clean() ? "OK: no future-chunk dependencies\n" : "VIOLATION\n");
    return report.clean() ? kExitOk : kExitViolation;
}

// ---------------------------------------------------------------------------

struct StreamArgs {
    std::string input;
    std::string mode = "recompute";
    std::string out;
    std::string checkpoint;
    std::string save_checkpoint;
};

int cmd_stream(const StreamArgs &args, const ConfigFlags &flags) {
    const FrameFile file = read_frames_file(args.input);
    EncoderConfig cfg = flags.resolve();
    if (file.frames == 0) {
        std::cout << "chunks=0 frames=0\n";
        return kExitOk;
    }
    cfg.input_dim = file.width;
    const StreamMode mode = parse_stream_mode(args.mode);
    const EncoderParams params = args.checkpoint.empty() ? init_encoder(cfg) : load_checkpoint(args.checkpoint, cfg);
    if (!args.save_checkpoint.empty()) {
        save_checkpoint(params, args.save_checkpoint);
    }
    const Tensor x = file.tensor();
    const std::size_t w = cfg.chunk_size;

    Output out(args.out);
    EncoderStream stream(params, cfg, mode);
    double worst = 0.0;
    std::size_t chunk = 0;
    for (std::size_t pos = 0; pos < file.frames; pos += w, ++chunk) {
        const std::size_t end = std::min(pos + w, file.frames);
        const Tensor frames = x.slice_rows(pos, end);
        const Tensor emitted = end - pos == w ? stream.push(frames) : stream.flush(frames);
        // Offline reference: the encoder over exactly the frames received so far.
        const Tensor offline = encoder_forward(x.slice_rows(0, end), params, cfg).slice_rows(pos, end);
        const double diff = max_abs_diff(emitted, offline);
        worst = std::max(worst, diff);
        out.stream() << "# chunk " << chunk << " rows " << emitted.rows() << '\n';
        write_frames(out.stream(), emitted);
        std::cout << "chunk " << chunk << " rows=" << emitted.rows() << " max_abs_diff_vs_offline=" << diff << '\n';
    }
    if (!stream.closed()) {
        stream.flush();
    }
    std::cout << "chunks=" << chunk << " frames=" << file.frames << " mode=" << to_string(mode)
              << " max_abs_diff=" << worst << '\n';
    if (mode == StreamMode::recompute && worst != 0.0) {
        std::cerr << "prefix consistency violated\n";
        return kExitViolation;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Streaming chunk / sampled-chunk encoder toolkit"};
    app.require_subcommand(1);

    ConfigFlags bench_flags;
    BenchArgs bench_args;
    auto *bench = app.add_subcommand("bench", "attention scaling benchmark, CSV records");
    bench_flags.attach(bench);
    bench->add_option("--kinds", bench_args.kinds, "attention kinds")->delimiter(',');
    bench->add_option("--lengths", bench_args.lengths, "explicit sequence lengths")->delimiter(',');
    bench->add_option("--base", bench_args.base, "base length when --lengths is absent");
    bench->add_option("--multiples", bench_args.multiples, "lengths base*1..base*multiples");
    bench->add_option("--repeats", bench_args.repeats, "timed runs per cell");
    bench->add_option("--precision", bench_args.precision, "32 or 64")->check(CLI::IsMember({32, 64}));
    bench->add_flag("--parallel", bench_args.parallel, "run cells concurrently");
    bench->add_option("--out", bench_args.out, "CSV path (default stdout)");
    bench->add_option("--summary-out", bench_args.summary_out, "JSON fit summary path");

    MaskArgs mask_args;
    auto *mask = app.add_subcommand("mask-dump", "print an attention mask as a 1/0 grid");
    mask->add_option("--kind", mask_args.kind, "chunk, ssc, time_restricted or global");
    mask->add_option("--length", mask_args.length, "sequence length L");
    mask->add_option("--chunk-size", mask_args.chunk_size, "chunk size W");
    mask->add_option("--valid-len", mask_args.valid_len, "true length (default L)");
    mask->add_option("--out", mask_args.out, "output path (default stdout)");

    ConfigFlags probe_flags;
    ProbeArgs probe_args;
    auto *probe = app.add_subcommand("probe", "finite-difference causality probe");
    probe_flags.attach(probe);
    probe->add_option("--length", probe_args.length, "sequence length (multiple of W)");
    probe->add_option("--mode", probe_args.mode, "offline, recompute or cached");
    probe->add_option("--delta", probe_args.delta, "input perturbation");
    probe->add_option("--out", probe_args.out, "report path (default stdout)");

    ConfigFlags stream_flags;
    StreamArgs stream_args;
    auto *stream = app.add_subcommand("stream", "stream a frame file chunk by chunk");
    stream_flags.attach(stream);
    stream->add_option("--input", stream_args.input, "frame file")->required()->check(CLI::ExistingFile);
    stream->add_option("--mode", stream_args.mode, "recompute or cached");
    stream->add_option("--out", stream_args.out, "emitted rows (default stdout)");
    stream->add_option("--checkpoint", stream_args.checkpoint, "load parameters from a checkpoint");
    stream->add_option("--save-checkpoint", stream_args.save_checkpoint, "write the parameters used");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*bench) {
            return cmd_bench(bench_args, bench_flags);
        }
        if (*mask) {
            return cmd_mask_dump(mask_args);
        }
        if (*probe) {
            return cmd_probe(probe_args, probe_flags);
        }
        return cmd_stream(stream_args, stream_flags);
    } catch (const ConfigError &e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}
