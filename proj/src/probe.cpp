#include "sscformer/probe.hpp"

#include <cstring>

namespace sscformer {

std::string_view to_string(ProbeMode mode) {
    switch (mode) {
    case ProbeMode::offline:
        return "offline";
    case ProbeMode::recompute:
        return "recompute";
    case ProbeMode::cached:
        return "cached";
    }
    return "unknown";
}

ProbeMode parse_probe_mode(std::string_view name) {
    for (ProbeMode mode : {ProbeMode::offline, ProbeMode::recompute, ProbeMode::cached}) {
        if (name == to_string(mode)) {
            return mode;
        }
    }
    throw ConfigError("unknown probe mode '" + std::string(name) + "'");
}

Tensor run_encoder(const Tensor &x, const EncoderParams &params, const EncoderConfig &config, ProbeMode mode) {
    const std::size_t len = x.rows();
    if (mode == ProbeMode::offline) {
        return encoder_forward(x, params, config).slice_rows(0, len);
    }
    EncoderStream stream(params, config, mode == ProbeMode::recompute ? StreamMode::recompute : StreamMode::cached);
    const std::size_t w = config.chunk_size;
    Tensor out = Tensor::matrix(len, config.d_model);
    std::size_t pos = 0;
    for (; pos + w <= len; pos += w) {
        const Tensor rows = stream.push(x.slice_rows(pos, pos + w));
        std::copy(rows.data().begin(), rows.data().end(), out.row(pos).begin());
    }
    if (pos < len) {
        const Tensor rows = stream.flush(x.slice_rows(pos, len));
        std::copy(rows.data().begin(), rows.data().end(), out.row(pos).begin());
    } else {
        stream.flush();
    }
    return out;
}

namespace {

bool rows_differ(const Tensor &a, const Tensor &b, std::size_t r) {
    const auto ra = a.row(r);
    const auto rb = b.row(r);
    return std::memcmp(ra.data(), rb.data(), ra.size_bytes()) != 0;
}

} // namespace

ProbeReport probe_causality(const Tensor &x, const EncoderParams &params, const EncoderConfig &config,
                            ProbeMode mode, double delta) {
    const std::size_t len = x.rows();
    const ChunkLayout layout = make_layout(len, config.chunk_size);
    ProbeReport report;
    report.mode = mode;
    report.length = len;
    report.chunk_size = config.chunk_size;
    report.observed = Reachability(len);

    const Tensor base = run_encoder(x, params, config, mode);
    for (std::size_t j = 0; j < len; ++j) {
        Tensor bumped = x;
        for (double &v : bumped.row(j)) {
            v += delta;
        }
        const Tensor out = run_encoder(bumped, params, config, mode);
        for (std::size_t t = 0; t < len; ++t) {
            if (!rows_differ(base, out, t)) {
                continue;
            }
            report.observed.set(t, j);
            if (layout.chunk_index(j) > layout.chunk_index(t)) {
                report.leaks.emplace_back(t, j);
            }
        }
    }

    if (mode == ProbeMode::offline) {
        const Reachability closure = encoder_reachability(config, layout, len);
        for (std::size_t t = 0; t < len; ++t) {
            for (std::size_t j = 0; j < len; ++j) {
                if (report.observed.at(t, j) && !closure.at(t, j)) {
                    report.unexplained.emplace_back(t, j);
                }
                if (closure.at(t, j) && layout.chunk_index(j) > layout.chunk_index(t)) {
                    ++report.forbidden_in_closure;
                }
            }
        }
    }
    return report;
}

} // namespace sscformer
