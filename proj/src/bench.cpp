#include "sscformer/bench.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

namespace sscformer {

std::vector<std::size_t> scaled_lengths(std::size_t base, std::size_t multiples) {
    std::vector<std::size_t> out;
    for (std::size_t m = 1; m <= multiples; ++m) {
        out.push_back(base * m);
    }
    return out;
}

namespace {

template <typename T>
BasicTensor<T> random_matrix(std::size_t rows, std::size_t cols, double bound, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    BasicTensor<T> out = BasicTensor<T>::matrix(rows, cols);
    for (T &v : out.data()) {
        v = static_cast<T>(dist(rng));
    }
    return out;
}

// Inputs for one (kind, L) cell, built before any timing.
template <typename T>
struct Cell {
    AttnKind kind;
    std::size_t len;
    MhsaParams<T> params;
    BasicTensor<T> x;
    AttnMask mask;
    MacCount predicted;
};

template <typename T>
Cell<T> make_cell(const BenchOptions &opt, AttnKind kind, std::size_t len, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t c = opt.d_model;
    const double bound = 1.0 / std::sqrt(static_cast<double>(c));
    MhsaParams<T> params;
    params.d_model = c;
    params.n_heads = opt.n_heads;
    params.w_q = random_matrix<T>(c, c, bound, rng);
    params.w_k = random_matrix<T>(c, c, bound, rng);
    params.w_v = random_matrix<T>(c, c, bound, rng);
    params.w_o = random_matrix<T>(c, c, bound, rng);
    BasicTensor<T> x = random_matrix<T>(len, c, 1.0, rng);
    const ChunkLayout layout = make_layout(len, opt.chunk_size);
    return Cell<T>{kind, len, std::move(params), std::move(x), build_mask(kind, layout, len),
                   predict_macs(kind, len, opt.chunk_size, c)};
}

template <typename T>
BenchRecord time_cell(const BenchOptions &opt, const Cell<T> &cell, std::size_t repeat) {
    const auto start = std::chrono::steady_clock::now();
    const MhsaResult<T> result = mhsa(cell.x, cell.params, cell.mask);
    const auto stop = std::chrono::steady_clock::now();
    BenchRecord rec;
    rec.kind = cell.kind;
    rec.length = cell.len;
    rec.chunk_size = opt.chunk_size;
    rec.d_model = opt.d_model;
    rec.n_heads = opt.n_heads;
    rec.repeat = repeat;
    rec.wall_time_s = std::chrono::duration<double>(stop - start).count();
    rec.measured_macs = result.macs.total();
    rec.predicted_macs = cell.predicted.total();
    return rec;
}

template <typename T>
std::vector<BenchRecord> run_cells(const BenchOptions &opt) {
    std::vector<Cell<T>> cells;
    for (AttnKind kind : opt.kinds) {
        for (std::size_t len : opt.lengths) {
            cells.push_back(make_cell<T>(opt, kind, len, opt.seed + cells.size()));
        }
    }
    // Untimed pass over every cell, largest first: caches are warm and the
    // allocator has adapted to the biggest buffers before timing starts.
    for (auto it = cells.rbegin(); it != cells.rend(); ++it) {
        (void)mhsa(it->x, it->params, it->mask);
    }

    std::vector<std::vector<BenchRecord>> per_cell(cells.size());
    if (opt.parallel_cells) {
        std::vector<std::future<std::vector<BenchRecord>>> pending;
        for (const Cell<T> &cell : cells) {
            pending.push_back(std::async(std::launch::async, [&opt, &cell] {
                std::vector<BenchRecord> out;
                for (std::size_t r = 0; r < opt.repeats; ++r) {
                    out.push_back(time_cell(opt, cell, r));
                }
                return out;
            }));
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            per_cell[i] = pending[i].get();
        }
    } else {
        // Every repeat visits all cells in a fresh random order, so bursts of
        // background load, or periodic host activity, spread across cells instead
        // of skewing the median of whichever cell was running at the time.
        std::vector<std::size_t> order(cells.size());
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
        for (std::size_t r = 0; r < opt.repeats; ++r) {
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t i : order) {
                per_cell[i].push_back(time_cell(opt, cells[i], r));
            }
        }
    }
    std::vector<BenchRecord> records;
    for (auto &part : per_cell) {
        records.insert(records.end(), part.begin(), part.end());
    }
    return records;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

std::vector<BenchRecord> run_bench(const BenchOptions &opt) {
    if (opt.repeats == 0 || opt.lengths.empty() || opt.kinds.empty()) {
        throw ConfigError("bench needs at least one kind, one length and one repeat");
    }
    for (std::size_t len : opt.lengths) {
        if (len == 0 || len % opt.chunk_size != 0) {
            throw ConfigError("bench length " + std::to_string(len) + " is not a multiple of chunk size " +
                              std::to_string(opt.chunk_size));
        }
    }
    return opt.single_precision ? run_cells<float>(opt) : run_cells<double>(opt);
}

std::string bench_csv_header() { return "kind,L,W,C,h,repeat,wall_time_s,measured_macs,predicted_macs"; }

std::string bench_csv_row(const BenchRecord &r) {
    std::ostringstream os;
    os.precision(9);
    os << to_string(r.kind) << ',' << r.length << ',' << r.chunk_size << ',' << r.d_model << ',' << r.n_heads << ','
       << r.repeat << ',' << r.wall_time_s << ',' << r.measured_macs << ',' << r.predicted_macs;
    return os.str();
}

PolyFit fit_polynomial(const std::vector<double> &x, const std::vector<double> &y, std::size_t degree) {
    if (x.size() != y.size() || x.size() <= degree) {
        throw DimensionError("polynomial fit of degree " + std::to_string(degree) + " needs more than " +
                             std::to_string(degree) + " points");
    }
    const auto n = static_cast<Eigen::Index>(x.size());
    const auto k = static_cast<Eigen::Index>(degree + 1);
    // Scale x to [0, 1] so the quadratic design matrix stays well conditioned.
    const double scale = *std::max_element(x.begin(), x.end());
    Eigen::MatrixXd design(n, k);
    Eigen::VectorXd target(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double p = 1.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            design(i, j) = p;
            p *= x[static_cast<std::size_t>(i)] / scale;
        }
        target(i) = y[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(target);
    const Eigen::VectorXd resid = target - design * beta;
    const double mean = target.mean();
    const double ss_tot = (target.array() - mean).square().sum();
    const double ss_res = resid.squaredNorm();
    PolyFit fit;
    double unscale = 1.0;
    for (Eigen::Index j = 0; j < k; ++j) {
        fit.coef.push_back(beta(j) / unscale);
        unscale *= scale;
    }
    fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

std::vector<BenchSummary> summarize_bench(const std::vector<BenchRecord> &records) {
    std::map<AttnKind, std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>>> grouped;
    for (const BenchRecord &r : records) {
        auto &cell = grouped[r.kind][r.length];
        cell.first.push_back(static_cast<double>(r.measured_macs));
        cell.second.push_back(r.wall_time_s);
    }
    std::vector<BenchSummary> out;
    for (const auto &[kind, by_len] : grouped) {
        std::vector<double> ls;
        std::vector<double> macs;
        std::vector<double> times;
        for (const auto &[len, cell] : by_len) {
            ls.push_back(static_cast<double>(len));
            macs.push_back(median(cell.first));
            times.push_back(median(cell.second));
        }
        BenchSummary s;
        s.kind = kind;
        const bool linear = kind == AttnKind::chunk || kind == AttnKind::ssc;
        s.model = linear ? "linear" : "quadratic";
        const std::size_t degree = linear ? 1 : 2;
        if (ls.size() > degree) {
            s.macs = fit_polynomial(ls, macs, degree);
            s.time = fit_polynomial(ls, times, degree);
            if (!linear) {
                const double lmax = ls.back();
                const double fitted = s.time.coef[0] + s.time.coef[1] * lmax + s.time.coef[2] * lmax * lmax;
                s.quadratic_share = fitted > 0.0 ? s.time.coef[2] * lmax * lmax / fitted : 0.0;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string summary_to_json(const std::vector<BenchSummary> &summaries) {
    nlohmann::json doc = nlohmann::json::array();
    for (const BenchSummary &s : summaries) {
        doc.push_back({{"kind", to_string(s.kind)},
                       {"model", s.model},
                       {"macs", {{"coef", s.macs.coef}, {"r2", s.macs.r2}}},
                       {"time", {{"coef", s.time.coef}, {"r2", s.time.r2}}},
                       {"quadratic_share", s.quadratic_share}});
    }
    return doc.dump(2);
}

} // namespace sscformer
