#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "stircp/errors.hpp"
#include "stircp/kernel.hpp"

using namespace stircp;

namespace {

// Brute force: scan the cube [-ell, ell]^d.
std::vector<Point> box_shell(int d, int ell) {
    std::vector<Point> out;
    Point p;
    for (int i = 0; i < d; ++i) p[i] = -ell;
    while (true) {
        if (l1_norm(p) == ell) out.push_back(p);
        int i = d - 1;
        for (; i >= 0; --i) {
            if (++p[i] <= ell) break;
            p[i] = -ell;
        }
        if (i < 0) break;
    }
    return out;
}

}  // namespace

TEST_CASE("shell size matches enumeration") {
    for (int d = 1; d <= 4; ++d)
        for (int ell = 1; ell <= 6; ++ell) {
            auto brute = box_shell(d, ell);
            CHECK(shell_size(d, ell) == brute.size());
            auto s = shell_points(d, ell);
            CHECK(s.points == brute);  // both lexicographic
        }
    for (int d = 1; d <= 8; ++d) CHECK(shell_size(d, 1) == static_cast<std::uint64_t>(2 * d));
    CHECK(shell_size(3, 1) == 6);
    CHECK(shell_size(3, 2) == 18);
    CHECK_THROWS_AS(shell_size(0, 1), ValidationError);
    CHECK_THROWS_AS(shell_size(3, 0), ValidationError);
}

TEST_CASE("shell points") {
    auto s = shell_points(1, 3);
    CHECK(s.points == std::vector<Point>{Point{{-3}}, Point{{3}}});
    auto s32 = shell_points(3, 2);
    CHECK(s32.size() == 18);
    std::set<Point> uniq(s32.points.begin(), s32.points.end());
    CHECK(uniq.size() == 18);
    CHECK(uniq.count(Point{{2, 0, 0}}));
    CHECK(uniq.count(Point{{1, 1, 0}}));
    CHECK(uniq.count(Point{{0, -1, 1}}));
    for (const auto& p : s32.points) CHECK(uniq.count(-p));
    CHECK_THROWS_AS(shell_points(8, 30, 1000), ResourceError);
}

TEST_CASE("kernel probabilities") {
    auto nn = BranchKernel::nearest_neighbor(3);
    CHECK(nn.prob(Point{}, Point{{1, 0, 0}}) == doctest::Approx(1.0 / 6));
    CHECK(nn.prob(Point{{4, 4, 4}}, Point{{4, 4, 4}}) == 0.0);
    BranchKernel k12(3, {{1, 0.5}, {2, 0.5}});
    CHECK(kernel_prob(k12, Point{}, Point{{1, 1, 0}}) == doctest::Approx(0.5 / 18));
    CHECK(k12.prob(Point{}, Point{{3, 0, 0}}) == 0.0);

    BranchKernel k(3, {{1, 0.2}, {2, 0.3}, {4, 0.5}});
    Point x{{2, -1, 5}};
    double total = 0;
    for (int ell = 1; ell <= 5; ++ell)
        for (const auto& z : shell_points(3, ell).points) {
            total += k.prob(x, x + z);
            CHECK(k.prob(x, x + z) == k.prob(Point{}, z));
            CHECK(k.prob(x, x + z) == k.prob(Point{}, -z));
        }
    CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("kernel validation") {
    CHECK_THROWS_AS(BranchKernel(3, {{1, 0.5}}), ValidationError);
    CHECK_THROWS_AS(BranchKernel(3, {{0, 1.0}}), ValidationError);
    CHECK_THROWS_AS(BranchKernel(3, {{1, -0.5}, {2, 1.5}}), ValidationError);
    try {
        BranchKernel::normalized(3, {{1, 0.49}, {2, 0.49}});
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()) == "weights sum 0.98 ≠ 1");
    }
    auto k = BranchKernel::normalized(3, {{1, 0.5 + 4e-10}, {2, 0.5}});
    CHECK(std::abs(k.weight(1) + k.weight(2) - 1.0) < 1e-15);
}

TEST_CASE("offset sampling matches the kernel law") {
    const int draws = 100000;
    {
        auto nn = BranchKernel::nearest_neighbor(3);
        Stream s(11, 0, StreamPurpose::kernel_sampling);
        std::map<Point, int> freq;
        for (int i = 0; i < draws; ++i) freq[sample_offset(nn, s)]++;
        CHECK(freq.size() == 6);
        double sd = std::sqrt((1.0 / 6) * (5.0 / 6) / draws);
        for (auto& [p, c] : freq) CHECK(std::abs(c / double(draws) - 1.0 / 6) < 3 * sd);
    }
    {
        BranchKernel k5(3, {{5, 1.0}});
        Stream s(12, 0, StreamPurpose::kernel_sampling);
        for (int i = 0; i < 10000; ++i) CHECK(l1_norm(k5.sample(s)) == 5);
    }
    {
        BranchKernel k13(3, {{1, 0.5}, {3, 0.5}});
        Stream s(13, 0, StreamPurpose::kernel_sampling);
        int ones = 0;
        for (int i = 0; i < draws; ++i) ones += l1_norm(k13.sample(s)) == 1;
        CHECK(std::abs(ones / double(draws) - 0.5) < 3 * std::sqrt(0.25 / draws));
    }
    {
        // Every point of shells 1 and 2 within 3 binomial standard errors.
        BranchKernel k(3, {{1, 0.4}, {2, 0.6}});
        Stream s(14, 0, StreamPurpose::kernel_sampling);
        std::map<Point, int> freq;
        for (int i = 0; i < draws; ++i) freq[k.sample(s)]++;
        CHECK(freq.size() == 24);
        for (int ell = 1; ell <= 2; ++ell)
            for (const auto& p : shell_points(3, ell).points) {
                double q = k.prob(Point{}, p);
                double sd = std::sqrt(q * (1 - q) / draws);
                CHECK(std::abs(freq[p] / double(draws) - q) < 3 * sd);
            }
    }
    {
        // Large radius in high dimension: sampled points stay on the shell.
        BranchKernel k(8, {{40, 1.0}});
        Stream s(15, 0, StreamPurpose::kernel_sampling);
        for (int i = 0; i < 1000; ++i) CHECK(l1_norm(k.sample(s)) == 40);
    }
}

TEST_CASE("shell sampler is uniform when compositions have three parts") {
    const int draws = 100000;
    Stream s(16, 0, StreamPurpose::kernel_sampling);
    std::map<Point, int> freq;
    for (int i = 0; i < draws; ++i) freq[sample_shell_point(3, 4, s)]++;
    auto shell = shell_points(3, 4);
    CHECK(freq.size() == shell.size());
    double q = 1.0 / static_cast<double>(shell.size());
    double sd = std::sqrt(q * (1 - q) / draws);
    for (const auto& p : shell.points) CHECK(std::abs(freq[p] / double(draws) - q) < 3.5 * sd);
}
