#include <cmath>
#include <set>

#include "doctest.h"
#include "stircp/errors.hpp"
#include "stircp/lattice.hpp"
#include "stircp/numerics.hpp"
#include "stircp/rng.hpp"

using namespace stircp;

TEST_CASE("philox known-answer vectors") {
    // Published Random123 test vectors for Philox4x32-10.
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) ==
          PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(philox4x32({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u}) ==
          PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                     {0xa4093822u, 0x299f31d0u}) ==
          PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and separated by key") {
    Stream a(42, 7, StreamPurpose::simulation), b(42, 7, StreamPurpose::simulation);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u32() == b.next_u32());

    Stream c(42, 8, StreamPurpose::simulation), d(42, 7, StreamPurpose::survival),
        e(43, 7, StreamPurpose::simulation);
    Stream f(42, 7, StreamPurpose::simulation);
    std::uint64_t x = f.next_u64();
    CHECK(c.next_u64() != x);
    CHECK(d.next_u64() != x);
    CHECK(e.next_u64() != x);
}

TEST_CASE("uniform, exponential and bounded integers") {
    Stream s(1, 0, StreamPurpose::simulation);
    RunningStats u, ex;
    std::array<int, 7> bins{};
    for (int i = 0; i < 200000; ++i) {
        double v = s.uniform();
        REQUIRE(v >= 0.0);
        REQUIRE(v < 1.0);
        u.add(v);
        ex.add(s.exponential(2.0));
        bins[s.below(7)]++;
    }
    CHECK(std::abs(u.mean() - 0.5) < 4 * std::sqrt(1.0 / 12 / 200000));
    CHECK(std::abs(ex.mean() - 0.5) < 4 * 0.5 / std::sqrt(200000.0));
    for (int b : bins) CHECK(std::abs(b / 200000.0 - 1.0 / 7) < 4 * std::sqrt((1.0 / 7) * (6.0 / 7) / 200000));
    Stream big(2, 0, StreamPurpose::simulation);
    for (int i = 0; i < 1000; ++i) CHECK(big.below(std::uint64_t{1} << 40) < (std::uint64_t{1} << 40));
}

TEST_CASE("points") {
    Point p = parse_point("1, -2,3", 3);
    CHECK(p[0] == 1);
    CHECK(p[1] == -2);
    CHECK(l1_norm(p) == 6);
    CHECK(squared_norm(p) == 14);
    CHECK(canonical(p, 3) == parse_point("3,2,1", 3));
    CHECK(to_string(p, 3) == "(1,-2,3)");
    CHECK_THROWS_AS(parse_point("1,2", 3), ValidationError);
    CHECK_THROWS_AS(parse_point("1,x,2", 3), ValidationError);
    CHECK_THROWS_AS(check_dimension(9), ValidationError);
    std::set<Point> dirs;
    for (int i = 0; i < 6; ++i) dirs.insert(direction(i));
    CHECK(dirs.size() == 6);
}

TEST_CASE("statistics helpers") {
    RunningStats r;
    for (double v : {1.0, 2.0, 3.0, 4.0}) r.add(v);
    CHECK(r.mean() == doctest::Approx(2.5));
    CHECK(r.variance() == doctest::Approx(5.0 / 3));

    auto w = wilson_interval(30, 100);
    CHECK(w.lo < 0.3);
    CHECK(w.hi > 0.3);
    CHECK(w.lo == doctest::Approx(0.2189).epsilon(1e-3));
    CHECK(w.hi == doctest::Approx(0.3958).epsilon(1e-3));
    CHECK_THROWS_AS(wilson_interval(0, 0), ValidationError);

    // Coverage on a synthetic Bernoulli(0.3) source: 1000 intervals of 200 trials.
    Stream s(5, 0, StreamPurpose::simulation);
    int covered = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        std::size_t k = 0;
        for (int i = 0; i < 200; ++i) k += s.bernoulli(0.3);
        auto iv = wilson_interval(k, 200);
        covered += (iv.lo <= 0.3 && 0.3 <= iv.hi);
    }
    CHECK(covered >= 930);
    CHECK(covered <= 975);

    auto c = cumulative_trapezoid({0, 1, 2}, {0, 1, 2});
    CHECK(c[2] == doctest::Approx(2.0));

    KahanSum k;
    k.add(1e16);
    for (int i = 0; i < 1000; ++i) k.add(1.0);
    k.add(-1e16);
    CHECK(k.value() == 1000.0);
}
