#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sscformer/attention.hpp"

namespace sscformer {

struct BenchRecord {
    AttnKind kind = AttnKind::chunk;
    std::size_t length = 0;
    std::size_t chunk_size = 0;
    std::size_t d_model = 0;
    std::size_t n_heads = 0;
    std::size_t repeat = 0;
    double wall_time_s = 0.0;
    std::uint64_t measured_macs = 0;
    std::uint64_t predicted_macs = 0;
};

struct BenchOptions {
    std::vector<AttnKind> kinds{AttnKind::chunk, AttnKind::ssc, AttnKind::time_restricted, AttnKind::global};
    std::vector<std::size_t> lengths;
    std::size_t chunk_size = 16;
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t repeats = 3;
    std::uint64_t seed = 0;
    bool single_precision = true;
    // Run (kind, L) cells concurrently; repeats inside a cell stay sequential.
    bool parallel_cells = false;
};

// Lengths base*1 .. base*multiples, mimicking an utterance concatenated with itself.
std::vector<std::size_t> scaled_lengths(std::size_t base, std::size_t multiples);

// Throws ConfigError when a length is not a multiple of the chunk size.
std::vector<BenchRecord> run_bench(const BenchOptions &options);

std::string bench_csv_header();
std::string bench_csv_row(const BenchRecord &record);

// Least-squares fit y ~ sum_i coef[i] * x^i.
struct PolyFit {
    std::vector<double> coef;
    double r2 = 0.0;
};
PolyFit fit_polynomial(const std::vector<double> &x, const std::vector<double> &y, std::size_t degree);

struct BenchSummary {
    AttnKind kind = AttnKind::chunk;
    std::string model; // "linear" for chunk/ssc, "quadratic" otherwise
    PolyFit macs;      // fit to measured MACs over L
    PolyFit time;      // fit to median wall time over L
    // Share of the fitted time at the largest L carried by the quadratic term.
    double quadratic_share = 0.0;
};

// One summary per kind, fitted to per-length medians.
std::vector<BenchSummary> summarize_bench(const std::vector<BenchRecord> &records);

std::string summary_to_json(const std::vector<BenchSummary> &summaries);

} // namespace sscformer
