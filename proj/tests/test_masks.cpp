#include "doctest.h"

#include <set>

#include "oracles.hpp"
#include "sscformer/masks.hpp"

using namespace sscformer;

namespace {

std::set<std::size_t> keys_of(const AttnMask &m, std::size_t q) {
    std::set<std::size_t> out;
    for (std::size_t k = 0; k < m.size(); ++k) {
        if (m.allows(q, k)) {
            out.insert(k);
        }
    }
    return out;
}

bool implies(const AttnMask &a, const AttnMask &b) {
    for (std::size_t q = 0; q < a.size(); ++q) {
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (a.allows(q, k) && !b.allows(q, k)) {
                return false;
            }
        }
    }
    return true;
}

} // namespace

TEST_CASE("chunk_mask") {
    const ChunkLayout layout = make_layout(12, 4);
    const AttnMask m = chunk_mask(layout, 12);
    for (std::size_t q = 0; q < 12; ++q) {
        for (std::size_t k = 0; k < 12; ++k) {
            CHECK(m.allows(q, k) == (q / 4 == k / 4));
        }
    }
    SUBCASE("single chunk is full") {
        const AttnMask one = chunk_mask(make_layout(6, 8), 6);
        CHECK(one.count() == 36);
    }
    SUBCASE("padding rows and columns are false") {
        const AttnMask p = chunk_mask(make_layout(10, 4), 10);
        for (std::size_t i = 0; i < 12; ++i) {
            CHECK_FALSE(p.allows(10, i));
            CHECK_FALSE(p.allows(11, i));
            CHECK_FALSE(p.allows(i, 10));
            CHECK_FALSE(p.allows(i, 11));
        }
    }
}

TEST_CASE("ssc_mask") {
    SUBCASE("sampled chunk {0,3,6,9} key sets") {
        const ChunkLayout layout = make_layout(12, 4);
        const AttnMask m = ssc_mask(layout, make_sampling_plan(layout), 12);
        CHECK(keys_of(m, 0) == std::set<std::size_t>{0, 3});
        CHECK(keys_of(m, 3) == std::set<std::size_t>{0, 3});
        CHECK(keys_of(m, 6) == std::set<std::size_t>{0, 3, 6});
        CHECK(keys_of(m, 9) == std::set<std::size_t>{0, 3, 6, 9});
    }
    SUBCASE("one chunk equals chunk_mask") {
        const ChunkLayout layout = make_layout(7, 8);
        const AttnMask s = ssc_mask(layout, make_sampling_plan(layout), 7);
        const AttnMask c = chunk_mask(layout, 7);
        for (std::size_t q = 0; q < 8; ++q) {
            for (std::size_t k = 0; k < 8; ++k) {
                CHECK(s.allows(q, k) == c.allows(q, k));
            }
        }
    }
    SUBCASE("L=8, W=4: sampled chunk {1,3,5,7}") {
        const ChunkLayout layout = make_layout(8, 4);
        const AttnMask m = ssc_mask(layout, make_sampling_plan(layout), 8);
        CHECK(keys_of(m, 1) == std::set<std::size_t>{1, 3});
        CHECK(keys_of(m, 3) == std::set<std::size_t>{1, 3});
        // 5 and 7 share chunk 1, so 7 is admissible for 5 just as 3 is for 1.
        CHECK(keys_of(m, 5) == std::set<std::size_t>{1, 3, 5, 7});
        CHECK(keys_of(m, 7) == std::set<std::size_t>{1, 3, 5, 7});
    }
}

TEST_CASE("time_restricted_mask") {
    const AttnMask m = time_restricted_mask(make_layout(12, 4), 12);
    CHECK(keys_of(m, 0) == std::set<std::size_t>{0, 1, 2, 3});
    CHECK(keys_of(m, 3) == std::set<std::size_t>{0, 1, 2, 3});
    CHECK(keys_of(m, 11).size() == 12);
    for (std::size_t q = 0; q < 12; ++q) {
        for (std::size_t k = 0; k < 12; ++k) {
            CHECK(m.allows(q, k) == (k / 4 <= q / 4));
        }
    }
}

TEST_CASE("mask builders equal the brute-force oracle and obey the invariants") {
    for (std::size_t w : {2, 4, 8}) {
        for (std::size_t len = w; len <= 64; ++len) {
            const ChunkLayout layout = make_layout(len, w);
            const SamplingPlan plan = make_sampling_plan(layout);
            const AttnMask chunk = chunk_mask(layout, len);
            const AttnMask ssc = ssc_mask(layout, plan, len);
            const AttnMask tr = time_restricted_mask(layout, len);
            for (const AttnMask *m : {&chunk, &ssc, &tr}) {
                for (std::size_t q = 0; q < layout.padded_len; ++q) {
                    for (std::size_t k = 0; k < layout.padded_len; ++k) {
                        REQUIRE(m->allows(q, k) ==
                                oracle::mask_rule(m->kind(), q, k, w, layout.num_chunks, len));
                        if (m->allows(q, k)) {
                            REQUIRE(k / w <= q / w);
                        }
                    }
                    if (q < len) {
                        REQUIRE(m->allows(q, q));
                    }
                }
            }
            REQUIRE(implies(ssc, tr));
            REQUIRE(implies(chunk, tr));
            if (len % w == 0) {
                std::size_t want = 0;
                for (std::size_t c = 1; c <= layout.num_chunks; ++c) {
                    want += c * w * w;
                }
                REQUIRE(tr.count() == want);
            }
        }
    }
}

TEST_CASE("local_blocks are the per-chunk stacks in gathered coordinates") {
    const ChunkLayout layout = make_layout(12, 4);
    const SamplingPlan plan = make_sampling_plan(layout);
    const auto blocks = ssc_mask(layout, plan, 12).local_blocks(plan);
    REQUIRE(blocks.size() == 3);
    // Sampled chunk 0 = {0,3,6,9} with chunk indices {0,0,1,2}.
    const BoolVec want{1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 1, 0, 1, 1, 1, 1};
    CHECK(blocks[0] == want);
}

TEST_CASE("batched_masks") {
    const std::vector<std::size_t> lengths{12, 9};
    const auto ssc = batched_masks(lengths, 12, 4, AttnKind::ssc);
    REQUIRE(ssc.size() == 2);
    const ChunkLayout layout = make_layout(12, 4);
    CHECK(ssc[0] == ssc_mask(layout, make_sampling_plan(layout), 12));
    for (std::size_t q = 0; q < 12; ++q) {
        for (std::size_t k = 0; k < 12; ++k) {
            CHECK(ssc[1].allows(q, k) == oracle::mask_rule(AttnKind::ssc, q, k, 4, 3, 9));
        }
    }
    const auto chunk = batched_masks(lengths, 12, 4, AttnKind::chunk);
    for (std::size_t q = 0; q < 12; ++q) {
        for (std::size_t k = 0; k < 12; ++k) {
            CHECK(chunk[1].allows(q, k) == (q < 9 && k < 9 && q / 4 == k / 4));
        }
    }
    const std::vector<std::size_t> one{12};
    CHECK(batched_masks(one, 12, 4, AttnKind::time_restricted)[0] == time_restricted_mask(layout, 12));
    const std::vector<std::size_t> bad{13};
    CHECK_THROWS_AS(batched_masks(bad, 12, 4, AttnKind::chunk), DimensionError);
    // Regenerated for a different chunk size, never reused.
    CHECK_FALSE(batched_masks(one, 12, 6, AttnKind::ssc)[0] == ssc[0]);
}

TEST_CASE("text dump and kind names") {
    const AttnMask m = chunk_mask(make_layout(4, 2), 4);
    CHECK(m.to_text() == "1100\n1100\n0011\n0011\n");
    CHECK(parse_attn_kind("time_restricted") == AttnKind::time_restricted);
    CHECK_THROWS_AS(parse_attn_kind("sliding"), ConfigError);
}
