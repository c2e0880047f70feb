#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "stircp/errors.hpp"
#include "stircp/numerics.hpp"
#include "stircp/simulator.hpp"

using namespace stircp;

namespace {

SimParams base(int d = 3, int N = 10, double theta = 0.0) {
    SimParams p;
    p.d = d;
    p.N = N;
    p.theta = theta;
    p.kernel = BranchKernel::nearest_neighbor(d);
    p.seed = 20240611;
    return p;
}

std::multiset<Point> occupied(const ContactProcess& c) {
    auto s = c.sites();
    return {s.begin(), s.end()};
}

}  // namespace

TEST_CASE("rates") {
    auto p = base(3, 10, 2.0);
    p.scale = TimeScale::original;
    CHECK(p.death_rate() == 1.0);
    CHECK(p.split_rate() == doctest::Approx(1.2));
    CHECK(p.exchange_rate() == 10.0);
    CHECK(p.yule_rate() == doctest::Approx(2 + 0.2 + 60));
    p.scale = TimeScale::speeded;
    CHECK(p.death_rate() == 10.0);
    CHECK(p.split_rate() == doctest::Approx(12.0));
    CHECK(p.exchange_rate() == 100.0);
    CHECK(p.tau() == doctest::Approx(std::log(10.0) / 100));
    p.theta = -20;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.theta = 0;
    p.N = 0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("new process") {
    auto p = base();
    p.genealogy = true;
    ContactProcess c(p);
    CHECK(c.population() == 1);
    CHECK(c.sites() == std::vector<Point>{Point{}});
    CHECK(c.clock() == 0.0);
    REQUIRE(c.records().size() == 1);
    CHECK(label_string(c.records()[0].label) == "(1)");
    CHECK(c.records()[0].end == EndKind::alive);
    CHECK(c.check_invariants());
}

TEST_CASE("same seed gives the same event sequence") {
    auto p = base(3, 5, 1.0);
    p.genealogy = true;
    ContactProcess a(p, 3), b(p, 3), other(p, 4);
    bool differs = false;
    for (int i = 0; i < 2000 && a.population() > 0; ++i) {
        auto ea = a.step();
        auto eb = b.step();
        CHECK(ea.time == eb.time);
        CHECK(ea.kind == eb.kind);
        CHECK(ea.to == eb.to);
        if (other.population() > 0) differs |= other.step().time != ea.time;
    }
    CHECK(differs);
    CHECK(a.counts() == b.counts());
}

TEST_CASE("first event law of a single particle") {
    auto p = base(3, 10, 0.0);
    p.scale = TimeScale::original;
    const int n = 100000;
    int deaths = 0, splits = 0, moves = 0;
    for (int i = 0; i < n; ++i) {
        ContactProcess c(p, static_cast<std::uint64_t>(i));
        switch (c.step().kind) {
            case EventKind::death: ++deaths; break;
            case EventKind::split: ++splits; break;
            case EventKind::move: ++moves; break;
            default: FAIL("unexpected event");
        }
    }
    auto near = [&](int count, double q) {
        return std::abs(count / double(n) - q) < 3 * std::sqrt(q * (1 - q) / n);
    };
    CHECK(near(deaths, 1.0 / 62));
    CHECK(near(splits, 1.0 / 62));
    CHECK(near(moves, 60.0 / 62));
}

TEST_CASE("suppressed births leave the configuration unchanged") {
    auto p = base(1, 1, 0.0);
    p.kernel = BranchKernel::nearest_neighbor(1);
    p.scale = TimeScale::original;
    ContactProcess c(p, {Point{{-1}}, Point{}, Point{{1}}}, 0, StreamPurpose::simulation);
    int seen = 0;
    for (int i = 0; i < 5000 && c.population() > 0; ++i) {
        auto before = occupied(c);
        auto supp = c.counts().suppressed_births;
        auto ev = c.step();
        if (ev.kind == EventKind::suppressed_birth) {
            ++seen;
            CHECK(occupied(c) == before);
            CHECK(c.counts().suppressed_births == supp + 1);
        }
        REQUIRE(c.check_invariants());
    }
    CHECK(seen > 0);
}

TEST_CASE("swaps never change the occupied set") {
    auto p = base(1, 4, 0.0);
    p.genealogy = true;
    p.stirring_only = true;
    ContactProcess c(p, {Point{}, Point{{1}}}, 0, StreamPurpose::simulation);
    int swaps = 0;
    for (int i = 0; i < 20000; ++i) {
        auto before = occupied(c);
        auto ev = c.step();
        if (ev.kind == EventKind::swap) {
            ++swaps;
            CHECK(occupied(c) == before);
        }
        if (ev.kind == EventKind::blocked) CHECK(occupied(c) == before);
    }
    CHECK(swaps > 0);
    CHECK(c.check_invariants());
}

TEST_CASE("adjacent labelled pair swaps at rate N") {
    // Episodes start adjacent and end when the pair separates.
    auto p = base(3, 10, 0.0);
    p.scale = TimeScale::original;
    p.genealogy = true;
    p.stirring_only = true;
    double adjacent_time = 0;
    std::uint64_t swaps = 0;
    for (std::uint64_t rep = 0; rep < 100000; ++rep) {
        ContactProcess c(p, {Point{}, Point{{1}}}, rep, StreamPurpose::simulation);
        while (true) {
            double t0 = c.clock();
            auto ev = c.step();
            adjacent_time += ev.time - t0;
            if (ev.kind == EventKind::swap) ++swaps;
            if (ev.kind == EventKind::move) break;
        }
    }
    double expected = p.N * adjacent_time;
    CHECK(std::abs(swaps - expected) < 3 * std::sqrt(expected));
}

TEST_CASE("stop rules") {
    SUBCASE("strongly subcritical runs die out") {
        auto p = base(3, 10, -5.0);
        int extinct = 0;
        for (std::uint64_t i = 0; i < 200; ++i) {
            ContactProcess c(p, i);
            extinct += c.run_until(StopRule{50.0, 500}).outcome == Outcome::extinct;
        }
        CHECK(extinct >= 198);
    }
    SUBCASE("population cap") {
        auto p = base();
        ContactProcess c(p);
        auto s = c.run_until(StopRule{std::nullopt, 1});
        CHECK(s.outcome == Outcome::capped);
        CHECK(s.final_population <= 1);
        for (std::uint64_t i = 0; i < 50; ++i) {
            ContactProcess d(base(3, 5, 3.0), i);
            auto r = d.run_until(StopRule{std::nullopt, 20});
            CHECK(r.final_population <= 20);
            if (r.outcome == Outcome::capped) CHECK(r.final_population == 20);
        }
    }
    SUBCASE("zero horizon") {
        ContactProcess c(base());
        auto s = c.run_until(StopRule{0.0, std::nullopt});
        CHECK(s.outcome == Outcome::horizon);
        CHECK(s.final_time == 0.0);
        CHECK(s.final_population == 1);
    }
    SUBCASE("rule needs a bound") {
        ContactProcess c(base());
        CHECK_THROWS_AS(c.run_until(StopRule{}), ValidationError);
    }
    SUBCASE("empty step") {
        ContactProcess c(base(), std::vector<Point>{}, 0, StreamPurpose::simulation);
        CHECK_THROWS_AS(c.step(), ValidationError);
    }
}

TEST_CASE("event counts balance") {
    auto p = base(3, 3, 2.0);
    for (std::uint64_t i = 0; i < 20; ++i) {
        ContactProcess c(p, i);
        auto s = c.run_until(StopRule{3.0, 300});
        const auto& k = s.counts;
        CHECK(1 + k.splits == k.deaths + s.final_population + k.suppressed_births);
        CHECK(s.peak_population >= s.final_population);
    }
}

TEST_CASE("pair counts") {
    auto p = base();
    auto pairs = [&](std::vector<Point> pts, int ell_max) {
        ContactProcess c(p, pts, 0, StreamPurpose::simulation);
        return c.pair_counts(ell_max);
    };
    CHECK(pairs({Point{}, Point{{1}}}, 3) == std::vector<std::uint64_t>{2, 0, 0});
    CHECK(pairs({Point{}}, 2) == std::vector<std::uint64_t>{0, 0});
    CHECK(pairs({Point{}, Point{{1}}, Point{{2}}}, 2) == std::vector<std::uint64_t>{4, 2});

    // Shell-lookup path (many particles) against brute force.
    Stream s(9, 0, StreamPurpose::simulation);
    std::set<Point> pts;
    while (pts.size() < 60) {
        Point x;
        for (int i = 0; i < 3; ++i) x[i] = static_cast<int>(s.below(5)) - 2;
        pts.insert(x);
    }
    std::vector<Point> v(pts.begin(), pts.end());
    std::vector<std::uint64_t> brute(2, 0);
    for (auto& a : v)
        for (auto& b : v) {
            auto dist = l1_norm(a - b);
            if (dist == 1 || dist == 2) brute[dist - 1]++;
        }
    CHECK(pairs(v, 2) == brute);

    // Multi-occupancy when suppression is off.
    auto q = base();
    q.suppression = false;
    ContactProcess m(q, {Point{}, Point{}, Point{{1}}}, 0, StreamPurpose::simulation);
    CHECK(m.pair_counts(1) == std::vector<std::uint64_t>{4});
    CHECK(m.occupancy(Point{}) == 2);
}

TEST_CASE("invariants over a million events") {
    auto p = base(3, 4, 4.0);
    p.genealogy = true;
    ContactProcess c(p, 1);
    std::uint64_t events = 0;
    while (events < 1000000) {
        if (c.population() == 0 || c.population() > 400) {
            CHECK(c.check_invariants());
            c = ContactProcess(p, events + 2);
        }
        c.step();
        ++events;
        if (events % 997 == 0) REQUIRE(c.check_invariants());
    }
    CHECK(c.check_invariants());
}

TEST_CASE("genealogy labels") {
    auto p = base(3, 5, 3.0);
    p.genealogy = true;
    ContactProcess c(p, 7);
    c.run_until(StopRule{2.0, 100});
    const auto& r = c.records();
    std::set<std::vector<std::uint8_t>> labels;
    for (const auto& rec : r) labels.insert(rec.label);
    CHECK(labels.size() == r.size());
    for (const auto& rec : r) {
        if (rec.parent) {
            auto pl = r[*rec.parent].label;
            CHECK(rec.label.size() == pl.size() + 1);
            CHECK(std::equal(pl.begin(), pl.end(), rec.label.begin()));
            CHECK(labels.count(pl));
            CHECK(rec.birth_time == r[*rec.parent].end_time);
        }
        if (rec.end == EndKind::suppressed) {
            CHECK(rec.birth_time == rec.end_time);
            CHECK(rec.label.back() == 1);
        }
        if (rec.end == EndKind::split) {
            CHECK(rec.child0);
            CHECK(rec.child1);
        }
    }
}

TEST_CASE("sampling at fixed times") {
    auto p = base(3, 5, 0.0);
    p.stirring_only = true;
    ContactProcess c(p, 11);
    Sampling s{{0.0, 0.1, 0.2, 5.0}, 1};
    auto out = c.run_until(StopRule{0.2, std::nullopt}, s);
    CHECK(out.observed == 3);
    CHECK(out.population_at[0] == 1.0);
    CHECK(out.pairs_at[0] == std::vector<std::uint64_t>{0});
    CHECK(out.final_time == 0.2);
}

TEST_CASE("independent branching walks have mean e^{theta t}") {
    auto p = base(3, 5, 1.0);
    p.suppression = false;
    const int reps = 3000;
    RunningStats m;
    for (int i = 0; i < reps; ++i) {
        ContactProcess c(p, static_cast<std::uint64_t>(i));
        m.add(static_cast<double>(c.run_until(StopRule{1.0, std::nullopt}).final_population));
    }
    CHECK(std::abs(m.mean() - std::exp(1.0)) < 3 * m.stderr_of_mean());
}

TEST_CASE("suppression and Yule bounds") {
    auto p = base(3, 3, 1.0);
    p.scale = TimeScale::original;
    RunningStats m;
    for (int i = 0; i < 2000; ++i) {
        ContactProcess c(p, static_cast<std::uint64_t>(i));
        m.add(static_cast<double>(c.run_until(StopRule{0.5, std::nullopt}).final_population));
    }
    CHECK(m.mean() <= std::exp(p.yule_rate() * 0.5) * 1.0 + 3 * m.stderr_of_mean());
    CHECK(m.mean() <= std::exp((p.lambda() - 1) * 0.5) + 3 * m.stderr_of_mean());
}

TEST_CASE("split-event statistics") {
    auto p = base(3, 50, 0.0);
    CHECK_THROWS_AS(estimate_z1(p, {1}, 10, 1), ValidationError);
    p.genealogy = true;
    auto z = estimate_z1(p, {1, 2, 3, 60}, 20000, 2);
    CHECK(z.by_ell[60].mean == 0.0);
    double total = 0;
    for (auto& [ell, e] : z.by_ell) total += e.mean;
    CHECK(total <= z.split_both_alive.mean + 1e-15);
    // The closed form for P(F_1) is exact.
    CHECK(std::abs(z.split_both_alive.mean - z.split_both_alive_formula) <
          3 * z.split_both_alive.std_error);
    CHECK(z.by_ell[1].mean > 0);
}

TEST_CASE("suppressed-birth counts") {
    auto p = base(3, 50, 0.0);
    CHECK_THROWS_AS(count_zeta(p, 0.0, 10, 1), ValidationError);
    p.genealogy = true;
    auto z0 = count_zeta(p, 0.0, 2000, 1);
    CHECK(z0.suppressed.mean == 0.0);
    auto q = p;
    q.suppression = false;
    auto off = count_zeta(q, p.tau(), 500, 1);
    CHECK(off.suppressed.mean == 0.0);
    auto z = count_zeta(p, p.tau(), 20000, 2);
    CHECK(z.suppressed.mean <= z.bound.mean + 3 * (z.suppressed.std_error + z.bound.std_error));
    CHECK(z.window_end == doctest::Approx(2 * p.tau()));
}
