#pragma once

#include <utility>
#include <vector>

#include "sscformer/encoder.hpp"

namespace sscformer {

enum class ProbeMode { offline, recompute, cached };

std::string_view to_string(ProbeMode mode);
ProbeMode parse_probe_mode(std::string_view name);

struct ProbeReport {
    ProbeMode mode = ProbeMode::offline;
    std::size_t length = 0;
    std::size_t chunk_size = 0;
    // observed.at(t, j): perturbing input j changed output t.
    Reachability observed{0};
    // Output t depends on input j from a strictly later chunk.
    std::vector<std::pair<std::size_t, std::size_t>> leaks;
    // Offline only: observed dependencies missing from the composed
    // per-layer reachability.
    std::vector<std::pair<std::size_t, std::size_t>> unexplained;
    // Offline only: pairs the composed reachability admits from future chunks.
    std::size_t forbidden_in_closure = 0;

    bool clean() const { return leaks.empty() && unexplained.empty() && forbidden_in_closure == 0; }
};

// Encoder outputs for x (one row per input frame), computed offline or by
// streaming chunk by chunk with a final flush.
Tensor run_encoder(const Tensor &x, const EncoderParams &params, const EncoderConfig &config, ProbeMode mode);

/// Finite-difference dependency probe: adds `delta` to every feature of input
/// frame j, reruns, and records which output rows changed at all. Any change
/// in a row from an earlier chunk than j is a leak.
ProbeReport probe_causality(const Tensor &x, const EncoderParams &params, const EncoderConfig &config,
                            ProbeMode mode, double delta = 1e-3);

} // namespace sscformer
