#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "sscformer/probe.hpp"

namespace py = pybind11;
using namespace sscformer;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array &a) {
    if (a.ndim() != 2) {
        throw DimensionError("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
    }
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto cols = static_cast<std::size_t>(a.shape(1));
    return Tensor(Shape{rows, cols}, std::vector<double>(a.data(), a.data() + rows * cols));
}

py::array_t<double> to_array(const Tensor &t) {
    if (t.empty()) {
        return py::array_t<double>(std::vector<py::ssize_t>{0, 0});
    }
    py::array_t<double> out({static_cast<py::ssize_t>(t.rows()), static_cast<py::ssize_t>(t.cols())});
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

py::array_t<bool> mask_array(const AttnMask &m) {
    const auto n = static_cast<py::ssize_t>(m.size());
    py::array_t<bool> out({n, n});
    auto view = out.mutable_unchecked<2>();
    for (py::ssize_t q = 0; q < n; ++q) {
        for (py::ssize_t k = 0; k < n; ++k) {
            view(q, k) = m.allows(static_cast<std::size_t>(q), static_cast<std::size_t>(k));
        }
    }
    return out;
}

py::dict macs_dict(const MacCount &m) {
    py::dict d;
    d["projections"] = m.projections;
    d["qk_scores"] = m.qk_scores;
    d["av_mix"] = m.av_mix;
    d["output_proj"] = m.output_proj;
    d["total"] = m.total();
    return d;
}

// Owns the parameters so streams can keep a reference to them.
struct Encoder {
    EncoderConfig config;
    EncoderParams params;

    explicit Encoder(EncoderConfig c) : config(std::move(c)) {
        config.validate();
        params = init_encoder(config);
    }
};

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Chunk / sampled-chunk streaming encoder";

    auto base = py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);
    (void)base;

    py::class_<ChunkLayout>(m, "ChunkLayout")
        .def_readonly("original_len", &ChunkLayout::original_len)
        .def_readonly("chunk_size", &ChunkLayout::chunk_size)
        .def_readonly("padded_len", &ChunkLayout::padded_len)
        .def_readonly("num_chunks", &ChunkLayout::num_chunks)
        .def("__repr__", [](const ChunkLayout &l) {
            return "ChunkLayout(L=" + std::to_string(l.original_len) + ", W=" + std::to_string(l.chunk_size) +
                   ", Lp=" + std::to_string(l.padded_len) + ", Cn=" + std::to_string(l.num_chunks) + ")";
        });

    m.def("make_layout", &make_layout, py::arg("length"), py::arg("chunk_size"));

    m.def(
        "sampling_plan",
        [](std::size_t len, std::size_t w) {
            const SamplingPlan plan = make_sampling_plan(make_layout(len, w));
            return py::make_tuple(plan.gather, plan.scatter);
        },
        py::arg("length"), py::arg("chunk_size"), "(gather, scatter) index lists over the padded length");

    m.def(
        "attention_mask",
        [](const std::string &kind, std::size_t len, std::size_t w, std::optional<std::size_t> valid) {
            return mask_array(build_mask(parse_attn_kind(kind), make_layout(len, w), valid.value_or(len)));
        },
        py::arg("kind"), py::arg("length"), py::arg("chunk_size"), py::arg("valid_len") = py::none(),
        "Boolean [Lp x Lp] admissibility matrix");

    m.def(
        "predict_macs",
        [](const std::string &kind, std::size_t len, std::size_t w, std::size_t c) {
            return macs_dict(predict_macs(parse_attn_kind(kind), len, w, c));
        },
        py::arg("kind"), py::arg("length"), py::arg("chunk_size"), py::arg("d_model"));

    m.def(
        "mhsa",
        [](const Array &x, const Array &w_q, const Array &w_k, const Array &w_v, const Array &w_o,
           std::size_t n_heads, const std::string &kind, std::size_t w, std::optional<std::size_t> valid) {
            MhsaParams<double> p;
            p.w_q = to_tensor(w_q);
            p.w_k = to_tensor(w_k);
            p.w_v = to_tensor(w_v);
            p.w_o = to_tensor(w_o);
            p.d_model = p.w_q.rows();
            p.n_heads = n_heads;
            const Tensor xt = to_tensor(x);
            const AttnMask mask = build_mask(parse_attn_kind(kind), make_layout(xt.rows(), w), valid.value_or(xt.rows()));
            const auto res = mhsa(xt, p, mask);
            return py::make_tuple(to_array(res.output), macs_dict(res.macs));
        },
        py::arg("x"), py::arg("w_q"), py::arg("w_k"), py::arg("w_v"), py::arg("w_o"), py::arg("n_heads"),
        py::arg("kind"), py::arg("chunk_size"), py::arg("valid_len") = py::none(),
        "Masked multi-head self-attention; x must have a multiple of chunk_size rows. Returns (output, macs).");

    m.def(
        "c2_depthwise",
        [](const Array &x, const Array &kernel, std::size_t w, double lambda) {
            C2ConvParams p;
            p.depthwise = to_tensor(kernel);
            p.kernel_size = p.depthwise.rows();
            p.right_mask = p.kernel_size / 2;
            p.chunk_size = w;
            p.lambda = lambda;
            const Tensor xt = to_tensor(x);
            return to_array(c2_depthwise(xt, p, make_layout(xt.rows(), w)));
        },
        py::arg("x"), py::arg("kernel"), py::arg("chunk_size"), py::arg("lam") = 0.7,
        "Blended causal / chunk-local depthwise convolution with one shared [K x C] kernel");

    py::class_<EncoderConfig>(m, "EncoderConfig")
        .def(py::init<>())
        .def_readwrite("input_dim", &EncoderConfig::input_dim)
        .def_readwrite("d_model", &EncoderConfig::d_model)
        .def_readwrite("n_heads", &EncoderConfig::n_heads)
        .def_readwrite("block_pairs", &EncoderConfig::block_pairs)
        .def_readwrite("chunk_size", &EncoderConfig::chunk_size)
        .def_readwrite("kernel_size", &EncoderConfig::kernel_size)
        .def_readwrite("right_mask", &EncoderConfig::right_mask)
        .def_readwrite("lam", &EncoderConfig::lambda)
        .def_readwrite("ff_expansion", &EncoderConfig::ff_expansion)
        .def_readwrite("eps", &EncoderConfig::eps)
        .def_readwrite("seed", &EncoderConfig::seed)
        .def_readwrite("chunk_only", &EncoderConfig::chunk_only)
        .def_readwrite("unmask_ssc", &EncoderConfig::unmask_ssc)
        .def_property_readonly("num_blocks", &EncoderConfig::num_blocks)
        .def("validate", &EncoderConfig::validate)
        .def("to_text", [](const EncoderConfig &c) { return config_to_text(c); })
        .def_static("from_text", &parse_config)
        .def("__eq__", [](const EncoderConfig &a, const EncoderConfig &b) { return a == b; });

    py::class_<Encoder>(m, "Encoder")
        .def(py::init<EncoderConfig>(), py::arg("config"))
        .def_readonly("config", &Encoder::config)
        .def("forward",
             [](const Encoder &e, const Array &x, std::optional<std::size_t> valid) {
                 const Tensor xt = to_tensor(x);
                 return to_array(encoder_forward(xt, e.params, e.config, valid.value_or(xt.rows())));
             },
             py::arg("x"), py::arg("valid_len") = py::none(), "Offline forward; returns [Lp x d_model]")
        .def("checksum", [](const Encoder &e) { return param_checksum(e.params); })
        .def("save", [](const Encoder &e, const std::string &path) { save_checkpoint(e.params, path); })
        .def("load", [](Encoder &e, const std::string &path) { e.params = load_checkpoint(path, e.config); });

    py::class_<EncoderStream>(m, "EncoderStream")
        .def(py::init([](const Encoder &e, const std::string &mode) {
                 return std::make_unique<EncoderStream>(e.params, e.config, parse_stream_mode(mode));
             }),
             py::arg("encoder"), py::arg("mode") = "recompute", py::keep_alive<1, 2>())
        .def("push", [](EncoderStream &s, const Array &frames) { return to_array(s.push(to_tensor(frames))); })
        .def("flush",
             [](EncoderStream &s, std::optional<Array> frames) {
                 return to_array(frames ? s.flush(to_tensor(*frames)) : s.flush());
             },
             py::arg("frames") = py::none())
        .def_property_readonly("chunks_emitted", &EncoderStream::chunks_emitted)
        .def_property_readonly("frames_received", &EncoderStream::frames_received)
        .def_property_readonly("closed", &EncoderStream::closed);

    m.def(
        "probe_causality",
        [](const Encoder &e, const Array &x, const std::string &mode, double delta) {
            const ProbeReport r = probe_causality(to_tensor(x), e.params, e.config, parse_probe_mode(mode), delta);
            py::dict d;
            d["observed_pairs"] = r.observed.count();
            d["leaks"] = r.leaks;
            d["unexplained"] = r.unexplained;
            d["forbidden_in_closure"] = r.forbidden_in_closure;
            d["clean"] = r.clean();
            return d;
        },
        py::arg("encoder"), py::arg("x"), py::arg("mode") = "offline", py::arg("delta") = 1e-3);
}
