#include "sscformer/attention.hpp"

#include <cmath>

#include "sscformer/tensor_math.hpp"

namespace sscformer {

template <typename T>
void MhsaParams<T>::validate() const {
    if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
        throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by " +
                          std::to_string(n_heads) + " heads");
    }
    const Shape square{d_model, d_model};
    for (const auto *w : {&w_q, &w_k, &w_v, &w_o}) {
        if (w->shape() != square) {
            throw DimensionError("attention projection " + shape_to_string(w->shape()) + ", expected " +
                                 shape_to_string(square));
        }
    }
}

MacCount &MacCount::operator+=(const MacCount &other) {
    projections += other.projections;
    qk_scores += other.qk_scores;
    av_mix += other.av_mix;
    output_proj += other.output_proj;
    return *this;
}

template <typename T>
BasicTensor<T> attend_block(const BasicTensor<T> &queries, const BasicTensor<T> &keys,
                            const BasicTensor<T> &values, std::span<const std::uint8_t> admit,
                            std::size_t n_heads, MacCount &macs) {
    const std::size_t n = queries.rows();
    const std::size_t m = keys.rows();
    const std::size_t width = queries.cols();
    if (keys.cols() != width || values.cols() != width || values.rows() != m || admit.size() != n * m) {
        throw DimensionError("attention block: queries " + shape_to_string(queries.shape()) + ", keys " +
                             shape_to_string(keys.shape()) + ", values " + shape_to_string(values.shape()));
    }
    const std::size_t dh = width / n_heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    BasicTensor<T> ctx = BasicTensor<T>::matrix(n, width);
    std::vector<T> scores(m);
    std::vector<T> probs(m);
    for (std::size_t h = 0; h < n_heads; ++h) {
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < n; ++i) {
            auto q = queries.row(i).subspan(off, dh);
            for (std::size_t j = 0; j < m; ++j) {
                auto k = keys.row(j).subspan(off, dh);
                T dot = T(0);
                for (std::size_t d = 0; d < dh; ++d) {
                    dot += q[d] * k[d];
                }
                scores[j] = dot * scale;
            }
            softmax_masked_row<T>(scores, admit.subspan(i * m, m), probs);
            auto out = ctx.row(i).subspan(off, dh);
            for (std::size_t j = 0; j < m; ++j) {
                auto v = values.row(j).subspan(off, dh);
                for (std::size_t d = 0; d < dh; ++d) {
                    out[d] += probs[j] * v[d];
                }
            }
        }
    }
    macs.qk_scores += static_cast<std::uint64_t>(n) * m * width;
    macs.av_mix += static_cast<std::uint64_t>(n) * m * width;
    return ctx;
}

namespace {

template <typename T>
void put_rows(BasicTensor<T> &dst, std::size_t begin, const BasicTensor<T> &src) {
    std::copy(src.data().begin(), src.data().end(),
              dst.data().begin() + static_cast<std::ptrdiff_t>(begin * dst.cols()));
}

SamplingPlan identity_plan(std::size_t len) {
    SamplingPlan plan;
    plan.gather.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
        plan.gather[i] = i;
    }
    plan.scatter = plan.gather;
    return plan;
}

BoolVec sub_mask(const AttnMask &mask, std::size_t q_begin, std::size_t q_end, std::size_t k_end) {
    BoolVec admit((q_end - q_begin) * k_end, 0);
    for (std::size_t q = q_begin; q < q_end; ++q) {
        const auto row = mask.row(q);
        std::copy(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k_end),
                  admit.begin() + static_cast<std::ptrdiff_t>((q - q_begin) * k_end));
    }
    return admit;
}

} // namespace

template <typename T>
MhsaResult<T> mhsa(const BasicTensor<T> &x, const MhsaParams<T> &params, const AttnMask &mask) {
    params.validate();
    const std::size_t len = mask.size();
    const std::size_t c = params.d_model;
    if (x.rank() != 2 || x.rows() != len || x.cols() != c) {
        throw DimensionError("mhsa input " + shape_to_string(x.shape()) + " for a mask over " + std::to_string(len) +
                             " tokens and d_model " + std::to_string(c));
    }
    const ChunkLayout &layout = mask.layout();
    const std::size_t w = layout.chunk_size;

    MhsaResult<T> result;
    MacCount &macs = result.macs;
    BasicTensor<T> q = matmul(x, params.w_q);
    BasicTensor<T> k = matmul(x, params.w_k);
    BasicTensor<T> v = matmul(x, params.w_v);
    macs.projections = 3ULL * len * c * c;

    BasicTensor<T> ctx = BasicTensor<T>::matrix(len, c);
    switch (mask.kind()) {
    case AttnKind::chunk:
    case AttnKind::ssc: {
        // Regular chunks are the sampled partition with the identity plan.
        const SamplingPlan plan = mask.kind() == AttnKind::ssc ? make_sampling_plan(layout) : identity_plan(len);
        if (mask.kind() == AttnKind::ssc) {
            q = apply_plan(q, plan, PlanDirection::gather);
            k = apply_plan(k, plan, PlanDirection::gather);
            v = apply_plan(v, plan, PlanDirection::gather);
        }
        const std::vector<BoolVec> blocks = mask.local_blocks(plan);
        for (std::size_t b = 0; b < layout.num_chunks; ++b) {
            const std::size_t lo = b * w;
            const std::size_t hi = lo + w;
            auto out = attend_block(q.slice_rows(lo, hi), k.slice_rows(lo, hi), v.slice_rows(lo, hi),
                                    std::span<const std::uint8_t>(blocks[b]), params.n_heads, macs);
            put_rows(ctx, lo, out);
        }
        if (mask.kind() == AttnKind::ssc) {
            ctx = apply_plan(ctx, plan, PlanDirection::scatter);
        }
        break;
    }
    case AttnKind::time_restricted:
        for (std::size_t b = 0; b < layout.num_chunks; ++b) {
            const std::size_t lo = b * w;
            const std::size_t hi = lo + w;
            const BoolVec admit = sub_mask(mask, lo, hi, hi);
            auto out = attend_block(q.slice_rows(lo, hi), k.slice_rows(0, hi), v.slice_rows(0, hi),
                                    std::span<const std::uint8_t>(admit), params.n_heads, macs);
            put_rows(ctx, lo, out);
        }
        break;
    case AttnKind::global: {
        const BoolVec admit = sub_mask(mask, 0, len, len);
        ctx = attend_block(q, k, v, std::span<const std::uint8_t>(admit), params.n_heads, macs);
        break;
    }
    }

    result.output = matmul(ctx, params.w_o);
    macs.output_proj = static_cast<std::uint64_t>(len) * c * c;
    return result;
}

MacCount predict_macs(AttnKind kind, std::size_t len, std::size_t chunk_size, std::size_t d_model) {
    const std::uint64_t l = len;
    const std::uint64_t c = d_model;
    MacCount macs;
    macs.projections = 3 * l * c * c;
    macs.output_proj = l * c * c;
    std::uint64_t score = 0;
    if (kind == AttnKind::global) {
        score = l * l * c;
    } else {
        if (chunk_size == 0 || len % chunk_size != 0) {
            throw ConfigError("MAC prediction for " + std::string(to_string(kind)) +
                              " needs L to be a multiple of W, got L=" + std::to_string(len) +
                              " W=" + std::to_string(chunk_size));
        }
        const std::uint64_t w = chunk_size;
        const std::uint64_t cn = l / w;
        switch (kind) {
        case AttnKind::chunk:
        case AttnKind::ssc:
            score = w * l * c;
            break;
        case AttnKind::time_restricted:
            // sum_{i=1..Cn} i query-chunk/key-prefix blocks of W x W
            score = c * w * w * (cn * (cn + 1) / 2);
            break;
        default:
            throw ConfigError("invalid attention kind");
        }
    }
    macs.qk_scores = score;
    macs.av_mix = score;
    return macs;
}

template struct MhsaParams<float>;
template struct MhsaParams<double>;
template MhsaResult<float> mhsa(const BasicTensor<float> &, const MhsaParams<float> &, const AttnMask &);
template MhsaResult<double> mhsa(const BasicTensor<double> &, const MhsaParams<double> &, const AttnMask &);
template BasicTensor<float> attend_block(const BasicTensor<float> &, const BasicTensor<float> &,
                                         const BasicTensor<float> &, std::span<const std::uint8_t>, std::size_t,
                                         MacCount &);
template BasicTensor<double> attend_block(const BasicTensor<double> &, const BasicTensor<double> &,
                                          const BasicTensor<double> &, std::span<const std::uint8_t>, std::size_t,
                                          MacCount &);

} // namespace sscformer
