#include "doctest.h"

#include "oracles.hpp"
#include "sscformer/attention.hpp"

using namespace sscformer;

namespace {

MhsaParams<double> random_params(std::size_t c, std::size_t h, std::uint64_t seed) {
    MhsaParams<double> p;
    p.d_model = c;
    p.n_heads = h;
    p.w_q = oracle::random_tensor(c, c, seed, 0.5);
    p.w_k = oracle::random_tensor(c, c, seed + 1, 0.5);
    p.w_v = oracle::random_tensor(c, c, seed + 2, 0.5);
    p.w_o = oracle::random_tensor(c, c, seed + 3, 0.5);
    return p;
}

AttnMask mask_for(AttnKind kind, std::size_t len, std::size_t w, std::size_t valid) {
    return build_mask(kind, make_layout(len, w), valid);
}

} // namespace

TEST_CASE("predict_macs closed forms") {
    // L=8, W=4, C=4: 4*8*16 + 2*4*8*4 = 512 + 256.
    CHECK(predict_macs(AttnKind::chunk, 8, 4, 4).total() == 768);
    CHECK(predict_macs(AttnKind::ssc, 8, 4, 4).total() == 768);
    CHECK(predict_macs(AttnKind::global, 8, 4, 4).total() == 512 + 2 * 64 * 4);
    // Score part alone: 2WLC = 256 for chunk; time-restricted 2C*W^2*Cn(Cn+1)/2 = 384.
    const MacCount tr = predict_macs(AttnKind::time_restricted, 8, 4, 4);
    CHECK(tr.qk_scores + tr.av_mix == 384);
    CHECK_THROWS_AS(predict_macs(AttnKind::chunk, 10, 4, 4), ConfigError);
}

TEST_CASE("measured MACs equal the closed forms over the grid") {
    for (std::size_t w : {2, 4, 8}) {
        for (std::size_t len : {8, 16, 32, 64}) {
            if (len < w) {
                continue;
            }
            for (std::size_t c : {4, 8}) {
                const auto params = random_params(c, 2, len + c);
                const Tensor x = oracle::random_tensor(len, c, w);
                for (AttnKind kind : {AttnKind::chunk, AttnKind::ssc, AttnKind::time_restricted, AttnKind::global}) {
                    const auto res = mhsa(x, params, mask_for(kind, len, w, len));
                    REQUIRE(res.macs == predict_macs(kind, len, w, c));
                }
                const std::uint64_t l = len;
                REQUIRE(predict_macs(AttnKind::chunk, len, w, c).total() == 4 * l * c * c + 2 * w * l * c);
                REQUIRE(predict_macs(AttnKind::global, len, w, c).total() == 4 * l * c * c + 2 * l * l * c);
            }
        }
    }
}

TEST_CASE("second differences separate linear from quadratic growth") {
    const std::size_t w = 4;
    const std::size_t c = 8;
    for (AttnKind kind : {AttnKind::chunk, AttnKind::ssc, AttnKind::global}) {
        std::vector<double> m;
        for (std::size_t len = 16; len <= 64; len += 16) {
            m.push_back(static_cast<double>(predict_macs(kind, len, w, c).total()));
        }
        for (std::size_t i = 2; i < m.size(); ++i) {
            const double d2 = m[i] - 2 * m[i - 1] + m[i - 2];
            if (kind == AttnKind::global) {
                CHECK(d2 == 2.0 * 16 * 16 * 2 * c);
            } else {
                CHECK(d2 == 0.0);
            }
        }
    }
}

TEST_CASE("time-restricted score cost is about half of global") {
    for (std::size_t cn = 8; cn <= 64; ++cn) {
        const std::size_t w = 4;
        const MacCount tr = predict_macs(AttnKind::time_restricted, cn * w, w, 8);
        const MacCount gl = predict_macs(AttnKind::global, cn * w, w, 8);
        const double ratio = static_cast<double>(tr.qk_scores + tr.av_mix) / static_cast<double>(gl.qk_scores + gl.av_mix);
        CHECK(ratio == doctest::Approx(static_cast<double>(cn + 1) / (2.0 * cn)));
        CHECK(ratio >= 0.45);
        CHECK(ratio <= 0.6);
    }
}

TEST_CASE("mhsa equals the dense masked oracle") {
    for (AttnKind kind : {AttnKind::chunk, AttnKind::ssc, AttnKind::time_restricted, AttnKind::global}) {
        for (std::size_t w : {2, 4}) {
            for (std::size_t len : {4, 7, 12, 16}) {
                const ChunkLayout layout = make_layout(len, w);
                const auto params = random_params(8, 2, 31 * len + w);
                Tensor x = oracle::random_tensor(layout.padded_len, 8, len);
                oracle::zero_from(x, len);
                const AttnMask mask = build_mask(kind, layout, len);
                const auto res = mhsa(x, params, mask);
                REQUIRE(max_abs_diff(res.output, oracle::masked_attention(x, params, mask)) < 1e-10);
                for (std::size_t r = len; r < layout.padded_len; ++r) {
                    for (double v : res.output.row(r)) {
                        REQUIRE(v == 0.0);
                    }
                }
            }
        }
    }
}

TEST_CASE("ssc with one chunk is exactly chunk attention") {
    const auto params = random_params(8, 4, 5);
    const Tensor x = oracle::random_tensor(8, 8, 6);
    const ChunkLayout layout = make_layout(8, 8);
    const auto a = mhsa(x, params, build_mask(AttnKind::ssc, layout, 8));
    const auto b = mhsa(x, params, build_mask(AttnKind::chunk, layout, 8));
    CHECK(a.output == b.output);
}

TEST_CASE("single-token chunks under chunk attention return the value projection") {
    auto params = random_params(4, 1, 9);
    const Tensor x = oracle::random_tensor(5, 4, 10);
    const auto res = mhsa(x, params, build_mask(AttnKind::chunk, make_layout(5, 1), 5));
    CHECK(max_abs_diff(res.output, oracle::matmul(oracle::matmul(x, params.w_v), params.w_o)) < 1e-12);
}

TEST_CASE("float32 attention tracks float64") {
    const auto pd = random_params(8, 2, 40);
    MhsaParams<float> pf;
    pf.d_model = 8;
    pf.n_heads = 2;
    auto cast = [](const Tensor &t) {
        TensorF out(t.shape());
        for (std::size_t i = 0; i < t.size(); ++i) {
            out[i] = static_cast<float>(t[i]);
        }
        return out;
    };
    pf.w_q = cast(pd.w_q);
    pf.w_k = cast(pd.w_k);
    pf.w_v = cast(pd.w_v);
    pf.w_o = cast(pd.w_o);
    const Tensor x = oracle::random_tensor(16, 8, 41);
    const AttnMask mask = build_mask(AttnKind::ssc, make_layout(16, 4), 16);
    const auto d = mhsa(x, pd, mask);
    const auto f = mhsa(cast(x), pf, mask);
    CHECK(d.macs == f.macs);
    for (std::size_t i = 0; i < d.output.size(); ++i) {
        CHECK(std::abs(d.output[i] - static_cast<double>(f.output[i])) < 1e-4);
    }
}

TEST_CASE("parameter validation") {
    auto p = random_params(6, 4, 1);
    CHECK_THROWS_AS(p.validate(), ConfigError);
    auto q = random_params(8, 2, 1);
    q.w_o = Tensor::matrix(8, 4);
    CHECK_THROWS_AS(q.validate(), DimensionError);
    CHECK_THROWS_AS(mhsa(Tensor::matrix(8, 6), random_params(8, 2, 1), build_mask(AttnKind::chunk, make_layout(8, 4), 8)),
                    DimensionError);
}
