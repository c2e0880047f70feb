#include <cmath>
#include <functional>
#include <map>
#include <numbers>

#include "doctest.h"
#include "stircp/errors.hpp"
#include "stircp/green.hpp"

using namespace stircp;

namespace {

// Watson's closed form for the d=3 simple random walk Green function at 0.
double watson_g0() {
    const double pi = std::numbers::pi;
    return std::sqrt(6.0) / (32 * pi * pi * pi) * std::tgamma(1.0 / 24) * std::tgamma(5.0 / 24) *
           std::tgamma(7.0 / 24) * std::tgamma(11.0 / 24);
}

// Direct enumeration of all 2d^n paths.
double paths_prob(int d, const Point& x, int n) {
    std::function<double(Point, int)> rec = [&](Point p, int left) -> double {
        if (left == 0) return p == x ? 1.0 : 0.0;
        double s = 0;
        for (int dir = 0; dir < 2 * d; ++dir) s += rec(p + direction(dir), left - 1);
        return s / (2 * d);
    };
    return rec(Point{}, n);
}

}  // namespace

TEST_CASE("n-step probabilities on the box") {
    CHECK(nstep_prob(3, Point{}, 0) == 1.0);
    CHECK(nstep_prob(3, Point{{1, 0, 0}}, 1) == doctest::Approx(1.0 / 6));
    CHECK(nstep_prob(3, Point{}, 2) == doctest::Approx(1.0 / 6));
    CHECK(nstep_prob(3, Point{{1, 0, 0}}, 2) == 0.0);
    CHECK(nstep_prob(3, Point{{3, 0, 0}}, 2) == 0.0);
    for (int d = 1; d <= 3; ++d)
        for (int n = 0; n <= 5; ++n)
            for (Point x : {Point{}, Point{{1}}, Point{{1, 1}}, Point{{2, 1, 0}}}) {
                for (int i = d; i < kMaxDim; ++i) x[i] = 0;
                CHECK(nstep_prob(d, x, n) == doctest::Approx(paths_prob(d, x, n)).epsilon(1e-13));
            }
    CHECK_THROWS_AS(nstep_prob(3, Point{}, 2000, 1 << 20), ResourceError);
}

TEST_CASE("box layers stay normalized") {
    for (int d : {2, 3, 4}) {
        const int n_max = d == 4 ? 16 : 30;
        WalkLayers w(d, n_max);
        for (int n = 1; n <= n_max; ++n) {
            w.advance();
            CHECK(std::abs(w.layer_sum() - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("splitting series equals the box layers") {
    for (int d : {1, 2, 3, 4, 5}) {
        const int n_max = d <= 3 ? 40 : (d == 4 ? 16 : 10);
        WalkLayers w(d, n_max);
        std::vector<Point> sites = {Point{}, Point{{1}}, Point{{2, 1}}, Point{{1, -1, 2}},
                                    Point{{3, 0, 0, 1}}, Point{{1, 1, 1, 1, 1}}};
        std::map<Point, std::vector<double>> series;
        for (auto& x : sites) {
            Point y = x;
            for (int i = d; i < kMaxDim; ++i) y[i] = 0;
            series[y] = nstep_series(d, y, n_max);
        }
        for (int n = 0; n <= n_max; ++n) {
            for (auto& [y, s] : series) CHECK(std::abs(s[n] - w.at(y)) < 1e-14);
            if (n < n_max) w.advance();
        }
    }
}

TEST_CASE("local CLT tail agrees with brute summation") {
    for (int d : {3, 4, 5})
        for (const Point& x : {Point{}, Point{{1}}, Point{{2, 1, 1}}}) {
            int par = static_cast<int>(l1_norm(x) & 1);
            double brute = 0;
            for (int n = 401; n < 2000000; ++n)
                if ((n & 1) == par) brute += clt_mass(d, x, n);
            // Remainder beyond 2e6 from the closed form integral.
            double rest = clt_tail(d, x, 1999999);
            CHECK(std::abs(clt_tail(d, x, 400) - (brute + rest)) < 1e-11);
        }
}

TEST_CASE("Green function at the origin") {
    const double g0 = watson_g0();
    CHECK(g0 == doctest::Approx(1.516386059151979).epsilon(1e-14));

    for (double tol : {1e-3, 1e-5, 1e-7}) {
        auto dp = green(3, Point{}, Point{}, tol);
        auto in = green_integral(3, Point{}, Point{}, tol);
        CHECK(std::abs(dp.value - g0) <= tol);
        CHECK(std::abs(in.value - g0) <= tol);
        CHECK(dp.error_bound <= tol / 2);
        CHECK(dp.n_max >= 256);
    }
    // Higher dimensions: reference values of the integral representation.
    CHECK(std::abs(green(4, Point{}, Point{}, 1e-7).value - 1.2394671218484816) < 1e-7);
    CHECK(std::abs(green(5, Point{}, Point{}, 1e-7).value - 1.1563081248402314) < 1e-7);
    CHECK(std::abs(green_integral(4, Point{}, Point{}, 1e-9).value - 1.2394671218484816) < 1e-9);
    CHECK_THROWS_AS(green(2, Point{}, Point{}, 1e-3), ValidationError);
    CHECK_THROWS_AS(green_integral(1, Point{}, Point{}, 1e-3), ValidationError);
}

TEST_CASE("Green function structure") {
    const double tol = 1e-6;
    // First-step decomposition G(0,0) = 1 + G(0, e1).
    for (int d : {3, 4, 5}) {
        double g0 = green(d, Point{}, Point{}, tol).value;
        double g1 = green(d, Point{}, Point{{1}}, tol).value;
        CHECK(std::abs(g0 - 1 - g1) < 2 * tol);
    }
    // Symmetries.
    Point a{{2, -1, 0}}, b{{-1, 0, 3}};
    double gab = green(3, a, b, tol).value;
    CHECK(green(3, b, a, tol).value == gab);
    CHECK(green(3, Point{}, b - a, tol).value == gab);
    CHECK(green(3, Point{}, Point{{1, -3, 3}}, tol).value == gab);
    // Dual routes for several sites and dimensions.
    for (int d : {3, 4})
        for (const Point& x : {Point{}, Point{{1}}, Point{{1, 1}}, Point{{2, 1, 1}}}) {
            double v1 = green(d, Point{}, x, 1e-6).value;
            double v2 = green_integral(d, Point{}, x, 1e-8).value;
            CHECK(std::abs(v1 - v2) < 1e-6);
        }
    // Monotone in dimension.
    CHECK(green(4, Point{}, Point{}, 1e-3).value < green(3, Point{}, Point{}, 1e-3).value);
    CHECK(green(4, Point{}, Point{}, 1e-3).value > 1.0);
}

TEST_CASE("Green table memoizes by canonical site") {
    GreenTable t(3, 1e-5);
    const auto& g = t.get(Point{{1, 2, 0}});
    CHECK(&t.get(Point{{0, -2, 1}}) == &g);
    CHECK(t.n_max() >= 256);
}

TEST_CASE("theta routes") {
    const double ref = 0.08606434319199652;
    CHECK(std::abs(theta_nn(3, 1e-7) - ref) < 1e-7);
    auto nn = BranchKernel::nearest_neighbor(3);
    auto kg = theta(nn, 1e-7);
    auto ws = theta_via_walk_sum(nn, 1e-7);
    CHECK(kg.method == ThetaMethod::kernel_green);
    CHECK(ws.method == ThetaMethod::walk_sum);
    CHECK(std::abs(kg.value - ref) < 1e-7);
    CHECK(std::abs(ws.value - ref) < 1e-7);
    CHECK(ws.error_bound <= 1e-7);

    for (int d : {3, 4, 5}) {
        double a = theta(BranchKernel::nearest_neighbor(d), 1e-6).value;
        double b = theta_nn(d, 1e-6);
        CHECK(std::abs(a - b) < 2e-6);
    }
    CHECK(theta_nn(4, 1e-6) < theta_nn(3, 1e-6));
    CHECK(theta_nn(5, 1e-6) < theta_nn(4, 1e-6));

    for (auto w : {std::map<int, double>{{1, 0.5}, {2, 0.5}}, std::map<int, double>{{3, 1.0}}}) {
        BranchKernel k(3, w);
        auto a = theta(k, 1e-6);
        auto b = theta_via_walk_sum(k, 1e-6);
        CHECK(a.value > 0);
        CHECK(std::abs(a.value - b.value) < 2e-6);
    }
}

TEST_CASE("walk-sum truncated at zero steps") {
    BranchKernel k(3, {{1, 0.5}, {2, 0.5}});
    double expect = (0.25 / 6 + 0.25 / 18) / 6;
    CHECK(theta_walk_partial(k, 0) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(theta_walk_partial(k, 50) > expect);
    CHECK(theta_walk_partial(k, 50) < theta_via_walk_sum(k, 1e-6).value);
}

TEST_CASE("shell hitting series") {
    auto nn = BranchKernel::nearest_neighbor(3);
    ShellHitting h(nn, {1, 2, 9}, 100);
    // q_0(1) = P(L in shell 1) = 1; q_1(2) = P(L + one step at distance 2).
    CHECK(h.q(1)[0] == doctest::Approx(1.0));
    CHECK(h.q(2)[1] == doctest::Approx(5.0 / 6));
    CHECK(h.q(1)[1] == 0.0);
    // Shell 9 is out of reach in fewer than 8 steps.
    for (int n = 0; n < 8; ++n) CHECK(h.q(9)[n] == 0.0);
    // Direct check against the box layers: sum over x, y of P^b(x) P^n(x, y).
    WalkLayers w(3, 12);
    for (int n = 0; n <= 12; ++n) {
        double direct = 0;
        for (const auto& x : shell_points(3, 1).points)
            for (const auto& y : shell_points(3, 2).points) direct += w.at(y - x) / 6.0;
        CHECK(std::abs(direct - h.q(2)[n]) < 1e-14);
        if (n < 12) w.advance();
    }
}

TEST_CASE("asymptotics report") {
    auto rep = asymptotics_report(BranchKernel::nearest_neighbor(3), {100, 1000}, 1e-6);
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.rows[0].lower_constant == doctest::Approx(1.0 / 30));
    CHECK(rep.rows[0].upper_constant == doctest::Approx(0.08606).epsilon(1e-4));
    CHECK(rep.rows[0].lambda_pred == doctest::Approx(1.00086).epsilon(1e-6));
    CHECK(rep.rows[1].phi == doctest::Approx(1e-3));
}

TEST_CASE("reported error bound covers the actual error") {
    for (int d : {3, 4, 5})
        for (const Point& x : {Point{}, Point{{1}}, Point{{1, 1}}, Point{{2, 1, 1}}, Point{{3, 2}}})
            for (double tol : {1e-4, 1e-6, 1e-8}) {
                auto dp = green(d, Point{}, x, tol);
                double ref = green_integral(d, Point{}, x, 1e-10).value;
                CHECK(std::abs(dp.value - ref) <= dp.error_bound + 1e-10);
                CHECK(dp.error_bound <= tol / 2);
            }
}
