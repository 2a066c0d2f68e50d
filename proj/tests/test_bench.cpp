#include "doctest.h"

#include <sstream>

#include "json.hpp"
#include "sscformer/bench.hpp"
#include "sscformer/frames_io.hpp"

using namespace sscformer;

TEST_CASE("csv header is fixed") {
    CHECK(bench_csv_header() == "kind,L,W,C,h,repeat,wall_time_s,measured_macs,predicted_macs");
}

TEST_CASE("run_bench records") {
    BenchOptions o;
    o.kinds = {AttnKind::chunk, AttnKind::global};
    o.lengths = {16, 32};
    o.chunk_size = 8;
    o.d_model = 8;
    o.n_heads = 2;
    o.repeats = 3;
    const auto records = run_bench(o);
    CHECK(records.size() == 2 * 2 * 3);
    for (const BenchRecord &r : records) {
        CHECK(r.measured_macs == r.predicted_macs);
        CHECK(r.wall_time_s >= 0.0);
        CHECK(r.repeat < 3);
    }
    const std::string row = bench_csv_row(records.front());
    CHECK(row.rfind("chunk,16,8,8,2,0,", 0) == 0);
    CHECK(std::count(row.begin(), row.end(), ',') == 8);
    o.lengths = {12};
    CHECK_THROWS_AS(run_bench(o), ConfigError);
}

TEST_CASE("scaled_lengths") {
    CHECK(scaled_lengths(64, 4) == std::vector<std::size_t>{64, 128, 192, 256});
}

TEST_CASE("polynomial fits") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    SUBCASE("exact line") {
        const PolyFit f = fit_polynomial(x, {3, 5, 7, 9, 11}, 1);
        CHECK(f.coef[0] == doctest::Approx(1.0));
        CHECK(f.coef[1] == doctest::Approx(2.0));
        CHECK(f.r2 == doctest::Approx(1.0));
    }
    SUBCASE("exact parabola") {
        const PolyFit f = fit_polynomial(x, {2, 9, 20, 35, 54}, 2); // 2x^2 + x - 1
        CHECK(f.coef[2] == doctest::Approx(2.0));
        CHECK(f.coef[1] == doctest::Approx(1.0));
        CHECK(f.coef[0] == doctest::Approx(-1.0));
    }
    SUBCASE("too few points") {
        CHECK_THROWS(fit_polynomial({1, 2}, {1, 2}, 2));
    }
}

TEST_CASE("summaries pick the model per kind and serialise") {
    std::vector<BenchRecord> records;
    for (std::size_t l : {16, 32, 48, 64}) {
        for (AttnKind k : {AttnKind::ssc, AttnKind::global}) {
            BenchRecord r;
            r.kind = k;
            r.length = l;
            r.measured_macs = k == AttnKind::ssc ? 10 * l : l * l;
            r.wall_time_s = static_cast<double>(r.measured_macs) * 1e-9;
            records.push_back(r);
        }
    }
    const auto s = summarize_bench(records);
    REQUIRE(s.size() == 2);
    const auto &ssc = s[0].kind == AttnKind::ssc ? s[0] : s[1];
    const auto &gl = s[0].kind == AttnKind::global ? s[0] : s[1];
    CHECK(ssc.model == "linear");
    CHECK(gl.model == "quadratic");
    CHECK(ssc.time.r2 == doctest::Approx(1.0));
    CHECK(gl.time.coef[2] > 0.0);
    CHECK(gl.quadratic_share == doctest::Approx(1.0));
    const auto j = nlohmann::json::parse(summary_to_json(s));
    CHECK(j.is_array());
    CHECK(j.size() == 2);
}

TEST_CASE("frame files") {
    SUBCASE("comments and blank lines") {
        std::istringstream in("# header\n1 2 3\n\n4 5 6\n");
        const FrameFile f = read_frames(in);
        CHECK(f.frames == 2);
        CHECK(f.width == 3);
        CHECK(f.tensor() == Tensor::from_rows({{1, 2, 3}, {4, 5, 6}}));
    }
    SUBCASE("bad number reports its line") {
        std::istringstream in("1 2\n3 x\n");
        try {
            (void)read_frames(in);
            FAIL("expected ParseError");
        } catch (const ParseError &e) {
            CHECK(e.line() == 2);
        }
    }
    SUBCASE("ragged width reports its line") {
        std::istringstream in("1 2\n\n3\n");
        try {
            (void)read_frames(in);
            FAIL("expected ParseError");
        } catch (const ParseError &e) {
            CHECK(e.line() == 3);
        }
    }
    SUBCASE("round trip") {
        const Tensor t = Tensor::from_rows({{0.1, -2.5e-7}, {3.0, 1.0 / 3.0}});
        std::ostringstream out;
        write_frames(out, t);
        std::istringstream in(out.str());
        CHECK(read_frames(in).tensor() == t);
    }
    SUBCASE("empty input") {
        std::istringstream in("# nothing\n");
        CHECK(read_frames(in).frames == 0);
    }
}
