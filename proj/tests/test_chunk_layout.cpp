#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "oracles.hpp"
#include "sscformer/chunk_layout.hpp"

using namespace sscformer;

TEST_CASE("make_layout") {
    CHECK(make_layout(12, 4) == ChunkLayout{12, 4, 12, 3});
    CHECK(make_layout(10, 4) == ChunkLayout{10, 4, 12, 3});
    CHECK(make_layout(3, 8) == ChunkLayout{3, 8, 8, 1});
    CHECK(make_layout(10, 4).padding() == 2);
    CHECK_THROWS_AS(make_layout(0, 4), ConfigError);
    CHECK_THROWS_AS(make_layout(4, 0), ConfigError);
}

TEST_CASE("make_sampling_plan") {
    SUBCASE("twelve tokens, three chunks") {
        const SamplingPlan plan = make_sampling_plan(make_layout(12, 4));
        CHECK(plan.gather == std::vector<std::size_t>{0, 3, 6, 9, 1, 4, 7, 10, 2, 5, 8, 11});
        CHECK(plan.sampled_chunk(0, 4) == std::vector<std::size_t>{0, 3, 6, 9});
    }
    SUBCASE("one chunk is the identity") {
        const SamplingPlan plan = make_sampling_plan(make_layout(5, 8));
        std::vector<std::size_t> id(8);
        std::iota(id.begin(), id.end(), 0);
        CHECK(plan.gather == id);
    }
    SUBCASE("W=1 is the identity") {
        const SamplingPlan plan = make_sampling_plan(make_layout(4, 1));
        CHECK(plan.gather == std::vector<std::size_t>{0, 1, 2, 3});
    }
}

TEST_CASE("sampling plan invariants over the property grid") {
    for (std::size_t w = 1; w <= 16; ++w) {
        for (std::size_t len = w; len <= 128; ++len) {
            const ChunkLayout layout = make_layout(len, w);
            REQUIRE(layout.padded_len % w == 0);
            REQUIRE(layout.num_chunks * w == layout.padded_len);
            REQUIRE(layout.padded_len - len < w);
            const SamplingPlan plan = make_sampling_plan(layout);
            std::vector<std::size_t> sorted = plan.gather;
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t i = 0; i < sorted.size(); ++i) {
                REQUIRE(sorted[i] == i);
                REQUIRE(plan.scatter[plan.gather[i]] == i);
            }
            for (std::size_t k = 0; k < layout.num_chunks; ++k) {
                const auto members = plan.sampled_chunk(k, w);
                REQUIRE(members.size() == w);
                std::set<std::size_t> got(members.begin(), members.end());
                std::set<std::size_t> want;
                for (std::size_t i = 0; i < layout.padded_len; ++i) {
                    if (i % layout.num_chunks == k) {
                        want.insert(i);
                    }
                }
                REQUIRE(got == want);
            }
        }
    }
}

TEST_CASE("apply_plan") {
    const ChunkLayout layout = make_layout(12, 4);
    const SamplingPlan plan = make_sampling_plan(layout);
    SUBCASE("gather order on row-labelled input") {
        Tensor x = Tensor::matrix(12, 2);
        for (std::size_t i = 0; i < 12; ++i) {
            x(i, 0) = x(i, 1) = static_cast<double>(i);
        }
        const Tensor g = apply_plan(x, plan, PlanDirection::gather);
        const std::vector<double> want{0, 3, 6, 9, 1, 4, 7, 10, 2, 5, 8, 11};
        for (std::size_t i = 0; i < 12; ++i) {
            CHECK(g(i, 0) == want[i]);
            CHECK(g(i, 1) == want[i]);
        }
    }
    SUBCASE("gather then scatter is the identity, bit-exact") {
        const Tensor x = oracle::random_tensor(12, 5, 9);
        CHECK(apply_plan(apply_plan(x, plan, PlanDirection::gather), plan, PlanDirection::scatter) == x);
    }
    SUBCASE("commutes with element-wise functions") {
        const Tensor x = oracle::random_tensor(12, 3, 10);
        Tensor fx = x;
        for (double &v : fx.data()) {
            v = std::tanh(v) * 3.0;
        }
        Tensor gfx = apply_plan(x, plan, PlanDirection::gather);
        for (double &v : gfx.data()) {
            v = std::tanh(v) * 3.0;
        }
        CHECK(apply_plan(fx, plan, PlanDirection::gather) == gfx);
    }
    SUBCASE("identity plan leaves input unchanged") {
        const SamplingPlan one = make_sampling_plan(make_layout(4, 4));
        const Tensor x = oracle::random_tensor(4, 2, 12);
        CHECK(apply_plan(x, one, PlanDirection::gather) == x);
    }
    SUBCASE("length mismatch") {
        CHECK_THROWS_AS(apply_plan(Tensor::matrix(8, 2), plan, PlanDirection::gather), DimensionError);
    }
}

TEST_CASE("pad_batch") {
    SUBCASE("lengths 12 and 9 at W=4") {
        const auto batch = pad_batch<double>({oracle::random_tensor(12, 3, 1), oracle::random_tensor(9, 3, 2)}, 4);
        CHECK(batch.padded_len == 12);
        CHECK(batch.lengths == std::vector<std::size_t>{12, 9});
        CHECK(batch.data.shape() == Shape{2, 12, 3});
        for (std::size_t r = 9; r < 12; ++r) {
            for (std::size_t c = 0; c < 3; ++c) {
                CHECK(batch.data[(12 + r) * 3 + c] == 0.0);
            }
        }
    }
    SUBCASE("already a multiple") {
        const auto batch = pad_batch<double>({oracle::random_tensor(8, 2, 1)}, 4);
        CHECK(batch.padded_len == 8);
    }
    SUBCASE("single short sequence") {
        const Tensor x = Tensor::from_rows({{5, 6}});
        const auto batch = pad_batch<double>({x}, 4);
        CHECK(batch.padded_len == 4);
        CHECK(batch.data.values() == std::vector<double>{5, 6, 0, 0, 0, 0, 0, 0});
    }
    SUBCASE("mixed feature dims") {
        CHECK_THROWS_AS(pad_batch<double>({Tensor::matrix(2, 2), Tensor::matrix(2, 3)}, 4), DimensionError);
        CHECK_THROWS_AS(pad_batch<double>({}, 4), DimensionError);
    }
}
