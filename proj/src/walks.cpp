#include "stircp/walks.hpp"

#include <gsl/gsl_sf_gamma.h>

#include <cmath>
#include <limits>
#include <random>

#include "stircp/errors.hpp"
#include "stircp/numerics.hpp"
#include "stircp/parallel.hpp"

namespace stircp {

namespace {

bool in_shell(const Point& x, int ell) { return l1_norm(x) == ell; }

void require_replicas(std::size_t n) {
    if (n == 0) throw ValidationError("replicas must be >= 1");
}

OccupationEstimate summarize(const std::vector<double>& v) {
    RunningStats s;
    for (double x : v) s.add(x);
    return {s.mean(), s.stderr_of_mean(), v.size()};
}

}  // namespace

NeighborhoodAtlas build_atlas(int d) {
    check_dimension(d, 2);
    NeighborhoodAtlas a;
    a.d = d;
    a.phi = shell_points(d, 1).points;
    a.second = shell_points(d, 2).points;
    std::set<Point> phi(a.phi.begin(), a.phi.end());
    for (const Point& x : a.second) {
        auto& A = a.A_of[x];
        for (const Point& e : a.phi)
            if (phi.count(x + e)) A.push_back(x + e);
    }
    for (const Point& x : a.phi) {
        for (const Point& e : a.phi) {
            Point y = x + e;
            auto it = a.A_of.find(y);
            if (it != a.A_of.end() && it->second.size() == 1) a.z_of.emplace(x, y);
        }
    }
    for (const Point& x : a.second) {
        bool j1 = false;
        for (auto& [x0, z] : a.z_of) j1 |= z == x;
        (j1 ? a.J1 : a.J2).insert(x);
    }
    return a;
}

AtlasCheck verify_atlas(const NeighborhoodAtlas& a) {
    AtlasCheck c;
    auto fail = [&](std::string msg) {
        c.ok = false;
        c.failures.push_back(std::move(msg));
    };
    std::set<Point> second(a.second.begin(), a.second.end());
    for (const Point& x : a.phi) {
        int singles = 0;
        for (const Point& e : a.phi) {
            Point y = x + e;
            if (!second.count(y)) continue;
            auto n = a.A_of.at(y).size();
            if (n == 1) {
                ++singles;
                if (y != x + x) fail("z for " + to_string(x, a.d) + " is " + to_string(y, a.d));
            } else if (n != 2) {
                fail("|A(" + to_string(y, a.d) + ")| = " + std::to_string(n));
            }
        }
        if (singles != 1)
            fail(to_string(x, a.d) + " has " + std::to_string(singles) + " neighbours with |A| = 1");
    }
    for (const Point& x : a.J1)
        if (a.J2.count(x)) fail(to_string(x, a.d) + " is in both J1 and J2");
    if (a.J1.size() + a.J2.size() != a.second.size()) fail("J1 and J2 do not cover the second shell");
    if (a.J1.size() != a.phi.size()) fail("|J1| differs from |phi|");
    return c;
}

std::string to_string(WalkType t) { return t == WalkType::V ? "V" : "W"; }

WalkType parse_walk_type(const std::string& s) {
    if (s == "V" || s == "v") return WalkType::V;
    if (s == "W" || s == "w") return WalkType::W;
    throw ValidationError("unknown walk '" + s + "' (expected V or W)");
}

double WalkKind::rate(const Point& x) const {
    const double n2 = N * N;
    if (type == WalkType::W && in_shell(x, 1)) return (4.0 * d - 1) * n2;
    return 4.0 * d * n2;
}

WalkStep walk_step(const WalkKind& kind, const Point& x, Stream& rng) {
    WalkStep s;
    s.holding = rng.exponential(kind.rate(x));
    const int d = kind.d;
    if (kind.type == WalkType::W && in_shell(x, 1)) {
        // 4d-1 equal slots: one for -x, two for each of the 2d-1 others.
        auto slot = rng.below(static_cast<std::uint64_t>(4 * d - 1));
        if (slot == 0) {
            s.next = -x;
            return s;
        }
        int k = static_cast<int>((slot - 1) / 2);
        // Skip the direction back to the origin.
        int back = -1;
        for (int dir = 0; dir < 2 * d; ++dir)
            if (direction(dir) == -x) back = dir;
        int dir = k < back ? k : k + 1;
        s.next = x + direction(dir);
        return s;
    }
    s.next = x + direction(static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * d))));
    return s;
}

ExitDistribution exit_distribution(WalkType type, int d, const Point& start,
                                   std::size_t replicas, std::uint64_t seed, int workers,
                                   std::uint64_t step_cap) {
    check_dimension(d, 2);
    require_replicas(replicas);
    if (!in_shell(start, 1)) throw ValidationError("exit walks must start in the unit shell");
    const auto atlas = build_atlas(d);
    const WalkKind kind{type, d, 1.0};

    // 1 = J1, 2 = J2, 0 = censored.
    auto cls = run_replicas<int>(replicas, workers, [&](std::size_t i) {
        Stream rng(seed, i, StreamPurpose::walk_exit);
        Point x = start;
        for (std::uint64_t n = 0; n < step_cap; ++n) {
            x = walk_step(kind, x, rng).next;
            if (l1_norm(x) > 1) return atlas.in_J1(x) ? 1 : 2;
        }
        return 0;
    });
    ExitDistribution out;
    out.replicas = replicas;
    for (int c : cls) {
        if (c == 1) ++out.J1_count;
        else if (c == 2) ++out.J2_count;
        else ++out.censored;
    }
    const double n = static_cast<double>(out.J1_count + out.J2_count);
    if (n > 0) {
        out.p_J1 = out.J1_count / n;
        out.p_J2 = out.J2_count / n;
        out.std_error = std::sqrt(out.p_J1 * out.p_J2 / n);
    }
    return out;
}

OccupationEstimate occupation_time(WalkType type, int d, double N, int ell, double t,
                                   const Point& start, std::size_t replicas,
                                   std::uint64_t seed, int workers) {
    check_dimension(d, 2);
    require_replicas(replicas);
    if (ell < 1) throw ValidationError("shell radius must be >= 1");
    if (!(N > 0)) throw ValidationError("N must be positive");
    if (!(t >= 0)) throw ValidationError("horizon must be >= 0");
    const WalkKind kind{type, d, 1.0};
    const double horizon = t * N * N;
    auto v = run_replicas<double>(replicas, workers, [&](std::size_t i) {
        Stream rng(seed, i, StreamPurpose::walk_occupation);
        Point x = start;
        double clock = 0;
        KahanSum occ;
        while (clock < horizon) {
            auto s = walk_step(kind, x, rng);
            double stay = std::min(s.holding, horizon - clock);
            if (in_shell(x, ell)) occ.add(stay);
            clock += s.holding;
            x = s.next;
        }
        return occ.value() / (N * N);
    });
    return summarize(v);
}

OccupationEstimate poissonized_occupation(int d, double N, int ell, double t,
                                          const Point& start, std::size_t replicas,
                                          std::uint64_t seed, int workers) {
    check_dimension(d, 2);
    require_replicas(replicas);
    if (ell < 1) throw ValidationError("shell radius must be >= 1");
    if (!(N > 0)) throw ValidationError("N must be positive");
    if (!(t >= 0)) throw ValidationError("horizon must be >= 0");
    const double rate = 4.0 * d * N * N;
    const double horizon = rate * t;  // on the Poisson clock's own axis
    auto v = run_replicas<double>(replicas, workers, [&](std::size_t i) {
        Stream path(seed, 2 * i, StreamPurpose::poisson_occupation);
        Stream clock(seed, 2 * i + 1, StreamPurpose::poisson_occupation);
        Point x = start;
        double arrival = 0;
        KahanSum occ;
        // D_n is read on [S_n, S_{n+1}) with S the unit-rate arrival times.
        while (arrival < horizon) {
            double next = arrival + clock.exponential(1.0);
            if (in_shell(x, ell)) occ.add(std::min(next, horizon) - arrival);
            arrival = next;
            x = x + direction(static_cast<int>(path.below(static_cast<std::uint64_t>(2 * d))));
        }
        return occ.value() / rate;
    });
    return summarize(v);
}

namespace {

struct Prefactors {
    double tau = 0;
    double T = 0;         // 4dN^2 tau
    double f1 = 0;        // P(F_1) as displayed
    double split = 0;     // (N+theta) e^{-a tau}
    double a = 0;         // 2N + theta
    double lambda = 0;    // 4dN^2
};

Prefactors prefactors(int d, double N, double theta, std::optional<double> tau) {
    if (!(N >= 2)) throw ValidationError("N must be >= 2");
    if (!(N + theta > 0)) throw ValidationError("branching rate N + theta must be positive");
    Prefactors p;
    p.tau = tau ? *tau : std::log(N) / (N * N);
    if (!(p.tau > 0)) throw ValidationError("tau must be positive");
    p.lambda = 4.0 * d * N * N;
    p.T = p.lambda * p.tau;
    p.a = 2 * N + theta;
    const double e = std::exp(-p.a * p.tau);
    p.f1 = (N + theta) / p.a * e * (1 - e);
    p.split = (N + theta) * e;
    return p;
}

// Weights P(n+1, T) and rho^n/(lambda+a) P(n+1, (lambda+a) tau), with the
// number of terms needed for both tails to fall under `budget`.
struct Weights {
    std::vector<double> formula, exact;
    double formula_tail = 0, exact_tail = 0;
};

Weights weights_for(const Prefactors& p, double budget_formula, double budget_exact) {
    Weights w;
    const double T2 = (p.lambda + p.a) * p.tau;
    const double rho = p.lambda / (p.lambda + p.a);
    for (int n = 0;; ++n) {
        w.formula.push_back(gsl_sf_gamma_inc_P(n + 1.0, p.T));
        w.exact.push_back(std::pow(rho, n) / (p.lambda + p.a) * gsl_sf_gamma_inc_P(n + 1.0, T2));
        // Geometric bounds on the remaining terms.
        double m = n + 1.0;
        if (m + 2 > p.T && m + 2 > T2) {
            double tf = gsl_sf_gamma_inc_P(m + 1, p.T) / (1 - p.T / (m + 2));
            double te = std::pow(rho, m) / (p.lambda + p.a) * gsl_sf_gamma_inc_P(m + 1, T2) /
                        (1 - rho * T2 / (m + 2));
            if (tf <= budget_formula && te <= budget_exact) {
                w.formula_tail = tf;
                w.exact_tail = te;
                return w;
            }
        }
        if (n > 1'000'000) throw ResourceError("incomplete-gamma weights did not converge");
    }
}

}  // namespace

std::map<int, Z1Value> z1_semianalytic_all(double N, double theta, const BranchKernel& k,
                                           double tol, std::optional<double> tau) {
    const int d = k.dim();
    require_transient(d);
    if (!(tol > 0)) throw ValidationError("tolerance must be positive");
    const auto p = prefactors(d, N, theta, tau);
    // q_n <= 1, so the tails of the weight sums bound the truncation error.
    const auto w = weights_for(p, tol * p.T / p.f1, tol / p.split);
    const int n_max = std::max<int>(64, static_cast<int>(w.formula.size()) - 1);
    auto ells = k.support();
    ShellHitting hit(k, ells, n_max);
    std::map<int, Z1Value> out;
    for (int ell : ells) {
        const auto& q = hit.q(ell);
        KahanSum sf, se;
        for (std::size_t n = 0; n < w.formula.size(); ++n) {
            sf.add(q[n] * w.formula[n]);
            se.add(q[n] * w.exact[n]);
        }
        Z1Value z;
        z.ell = ell;
        z.value = p.f1 / p.T * sf.value();
        z.exact_split_law = p.split * se.value();
        z.tail_bound = p.f1 / p.T * w.formula_tail;
        z.n_max = static_cast<int>(w.formula.size()) - 1;
        z.tau = p.tau;
        out[ell] = z;
    }
    return out;
}

Z1Value z1_semianalytic(int d, double N, double theta, const BranchKernel& k, int ell,
                        double tol, std::optional<double> tau) {
    if (d != k.dim()) throw ValidationError("kernel dimension differs from d");
    if (ell < 1) throw ValidationError("shell radius must be >= 1");
    require_transient(d);
    if (!(tol > 0)) throw ValidationError("tolerance must be positive");
    const auto p = prefactors(d, N, theta, tau);
    const auto w = weights_for(p, tol * p.T / p.f1, tol / p.split);
    const int n_max = std::max<int>(64, static_cast<int>(w.formula.size()) - 1);
    ShellHitting hit(k, {ell}, n_max);
    const auto& q = hit.q(ell);
    KahanSum sf, se;
    for (std::size_t n = 0; n < w.formula.size(); ++n) {
        sf.add(q[n] * w.formula[n]);
        se.add(q[n] * w.exact[n]);
    }
    Z1Value z;
    z.ell = ell;
    z.value = p.f1 / p.T * sf.value();
    z.exact_split_law = p.split * se.value();
    z.tail_bound = p.f1 / p.T * w.formula_tail;
    z.n_max = static_cast<int>(w.formula.size()) - 1;
    z.tau = p.tau;
    return z;
}

OccupationEstimate z1_monte_carlo(double N, double theta, const BranchKernel& k, int ell,
                                  std::size_t replicas, std::uint64_t seed, int workers) {
    const int d = k.dim();
    require_transient(d);
    require_replicas(replicas);
    if (ell < 1) throw ValidationError("shell radius must be >= 1");
    const auto p = prefactors(d, N, theta, std::nullopt);
    auto v = run_replicas<double>(replicas, workers, [&](std::size_t i) {
        Stream rng(seed, i, StreamPurpose::z1_sampling);
        double r = rng.uniform() * p.T;
        std::poisson_distribution<long> steps(r);
        long n = r > 0 ? steps(rng) : 0;
        Point x = k.sample(rng);
        for (long j = 0; j < n; ++j)
            x = x + direction(static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * d))));
        return in_shell(x, ell) ? p.f1 : 0.0;
    });
    return summarize(v);
}

ThetaLimitTable theta_limit_table(const BranchKernel& k, const std::vector<double>& N_list,
                                  double tol, double theta_param) {
    const int d = k.dim();
    require_transient(d);
    if (N_list.empty()) throw ValidationError("N list is empty");
    ThetaLimitTable t;
    t.d = d;
    t.kernel = k;
    t.theta_param = theta_param;
    t.tol = tol;

    auto limit = theta_via_walk_sum(k, tol);
    const double ref = theta(k, tol).value;
    std::map<int, double> ph;
    for (int ell : k.support())
        ph[ell] = k.weight(ell) / static_cast<double>(shell_size(d, ell));

    // sum_n q_n(ell) for the dominating bound, from the walk-sum machinery.
    ShellHitting full = ShellHitting::for_budget(k, k.support(), ph, tol / 2);
    double bound = 0;
    for (auto& [ell, w] : ph) bound += 2 * (1 + theta_param) * w * full.total(ell);

    for (double N : N_list) {
        // Per-ell tolerance scaled so the weighted sum meets tol.
        auto z = z1_semianalytic_all(N, theta_param, k, tol / (2 * N));
        ThetaLimitRow row;
        row.N = N;
        for (auto& [ell, w] : ph) {
            row.estimate += 2 * N * w * z.at(ell).value;
            row.exact_split_law += 2 * N * w * z.at(ell).exact_split_law;
        }
        row.bound = bound;
        row.theta_ref = ref;
        row.relative_gap = std::abs(row.estimate - ref) / ref;
        t.bound_holds &= row.estimate <= bound && row.exact_split_law <= bound;
        t.rows.push_back(row);
    }
    t.limit.N = std::numeric_limits<double>::infinity();
    t.limit.estimate = limit.value;
    t.limit.exact_split_law = limit.value;
    t.limit.bound = bound;
    t.limit.theta_ref = ref;
    t.limit.relative_gap = std::abs(limit.value - ref) / ref;
    const std::size_t n = t.rows.size();
    for (std::size_t i = n >= 3 ? n - 2 : 1; i < n; ++i)
        t.monotone_tail &= t.rows[i].relative_gap < t.rows[i - 1].relative_gap;
    return t;
}

}  // namespace stircp
