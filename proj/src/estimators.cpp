#include "stircp/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include "stircp/errors.hpp"
#include "stircp/green.hpp"
#include "stircp/parallel.hpp"

namespace stircp {

namespace {

void require_replicas(std::size_t n) {
    if (n == 0) throw ValidationError("replicas must be >= 1");
}

void require_grid(const std::vector<double>& t) {
    if (t.empty()) throw ValidationError("time grid is empty");
    if (!std::is_sorted(t.begin(), t.end()) || std::adjacent_find(t.begin(), t.end()) != t.end())
        throw ValidationError("time grid must be strictly increasing");
    if (t.front() < 0) throw ValidationError("time grid must be non-negative");
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

// Cumulative trapezoid on the grid and on every other grid point; the
// Richardson estimate of the fine rule's error is |fine - coarse| / 3.
std::vector<double> richardson_error(const std::vector<double>& x, const std::vector<double>& y) {
    const auto fine = cumulative_trapezoid(x, y);
    std::vector<double> err(x.size(), 0.0);
    double coarse = 0;
    for (std::size_t k = 2; k < x.size(); k += 2) {
        coarse += 0.5 * (x[k] - x[k - 2]) * (y[k] + y[k - 2]);
        err[k] = std::abs(fine[k] - coarse) / 3;
        if (k + 1 < x.size()) err[k + 1] = err[k];
    }
    if (x.size() > 1) err[1] = err.size() > 2 ? err[2] : 0.0;
    return err;
}

}  // namespace

StopRule default_proxy() { return StopRule{kDefaultTMax, kDefaultPopCap}; }

SurvivalEstimate survival_prob(const SimParams& p, const StopRule& proxy, std::size_t replicas,
                               int workers, StreamPurpose purpose) {
    p.validate();
    proxy.validate();
    require_replicas(replicas);
    auto outcome = run_replicas<int>(replicas, workers, [&](std::size_t i) {
        ContactProcess c(p, i, purpose);
        auto s = c.run_until(proxy);
        if (s.outcome == Outcome::extinct) return 0;
        return s.outcome == Outcome::capped ? 1 : 2;
    });
    SurvivalEstimate e;
    e.replicas = replicas;
    e.proxy = proxy;
    for (int o : outcome) {
        if (o == 0) ++e.censoring.extinct;
        else if (o == 1) ++e.censoring.capped;
        else ++e.censoring.horizon_alive;
    }
    e.survived = e.censoring.capped + e.censoring.horizon_alive;
    e.rho_hat = static_cast<double>(e.survived) / static_cast<double>(replicas);
    e.ci = wilson_interval(e.survived, replicas);
    return e;
}

LambdaCEstimate lambda_c_estimate(const SimParams& base, const StopRule& proxy,
                                  const LambdaCOptions& opts) {
    require_transient(base.d);
    proxy.validate();
    require_replicas(opts.replicas);
    if (!(opts.lambda_lo < opts.lambda_hi))
        throw ValidationError("degenerate bracket: lambda_lo = " + fmt(opts.lambda_lo) +
                              " must be below lambda_hi = " + fmt(opts.lambda_hi));
    if (!(opts.lambda_lo > 0)) throw ValidationError("lambda_lo must be positive");
    const double threshold =
        opts.threshold_times_N ? *opts.threshold_times_N / base.N : opts.threshold;
    if (!(threshold > 0 && threshold < 1)) throw ValidationError("threshold must lie in (0, 1)");
    const double resolution = opts.resolution > 0 ? opts.resolution : 0.02 / base.N;

    LambdaCEstimate est;
    est.d = base.d;
    est.N = base.N;
    est.kernel = base.kernel;
    est.threshold = threshold;
    auto probe = [&](double lambda) {
        SimParams p = base;
        p.theta = base.N * (lambda - 1);
        auto s = survival_prob(p, proxy, opts.replicas, opts.workers, StreamPurpose::lambda_probe);
        est.probes.push_back({lambda, s.rho_hat, s.survived, s.replicas});
        return s.rho_hat;
    };

    double lo = opts.lambda_lo, hi = opts.lambda_hi;
    const double f_lo = probe(lo), f_hi = probe(hi);
    if (f_lo >= threshold || f_hi < threshold)
        throw EstimationError("bracket not found: survival frequency " + fmt(f_lo) +
                              " at lambda " + fmt(lo) + " and " + fmt(f_hi) + " at lambda " +
                              fmt(hi) + " (threshold " + fmt(threshold) + ")");
    while (hi - lo > resolution && static_cast<int>(est.probes.size()) < opts.max_probes) {
        const double mid = 0.5 * (lo + hi);
        (probe(mid) >= threshold ? hi : lo) = mid;
    }
    est.lambda_lo = lo;
    est.lambda_hi = hi;
    est.lambda_hat = 0.5 * (lo + hi);
    est.scaled = (est.lambda_hat - 1) * base.N;
    est.converged = hi - lo <= resolution;

    // Least-squares slope over probes within 0.3/N of the estimate, widened
    // to all probes when fewer than three distinct points fall inside.
    auto slope_over = [&](double window) {
        double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const auto& pr : est.probes) {
            if (std::abs(pr.lambda - est.lambda_hat) > window) continue;
            n += 1;
            sx += pr.lambda;
            sy += pr.frequency;
            sxx += pr.lambda * pr.lambda;
            sxy += pr.lambda * pr.frequency;
        }
        double den = n * sxx - sx * sx;
        return n >= 3 && den > 0 ? (n * sxy - sx * sy) / den : 0.0;
    };
    double slope = slope_over(0.3 / base.N);
    if (!(slope > 0)) slope = slope_over(std::numeric_limits<double>::infinity());
    const double noise =
        std::sqrt(threshold * (1 - threshold) / static_cast<double>(opts.replicas));
    est.scaled_stderr =
        slope > 0 ? base.N * noise / slope : std::numeric_limits<double>::infinity();
    return est;
}

namespace {

struct ReplicaCurves {
    std::vector<double> pop;
    std::vector<std::vector<std::uint64_t>> pairs;
};

std::vector<ReplicaCurves> sample_curves(const SimParams& p, const std::vector<double>& grid,
                                         int ell_max, std::size_t replicas, int workers,
                                         StreamPurpose purpose) {
    p.validate();
    require_grid(grid);
    require_replicas(replicas);
    if (ell_max < 0) throw ValidationError("ell_max must be >= 0");
    return run_replicas<ReplicaCurves>(replicas, workers, [&](std::size_t i) {
        ContactProcess c(p, i, purpose);
        auto s = c.run_until(StopRule{grid.back(), std::nullopt}, Sampling{grid, ell_max});
        return ReplicaCurves{std::move(s.population_at), std::move(s.pairs_at)};
    });
}

CurveEstimate reduce(std::string name, const std::vector<double>& grid, std::size_t replicas,
                     const std::function<double(std::size_t, std::size_t)>& value) {
    CurveEstimate c;
    c.quantity = std::move(name);
    c.times = grid;
    c.replicas = replicas;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        RunningStats s;
        for (std::size_t i = 0; i < replicas; ++i) s.add(value(i, k));
        c.means.push_back(s.mean());
        c.stderrs.push_back(s.stderr_of_mean());
    }
    return c;
}

}  // namespace

CurveSet estimate_curves(const SimParams& p, const std::vector<double>& t_grid, int ell_max,
                         std::size_t replicas, int workers) {
    auto r = sample_curves(p, t_grid, ell_max, replicas, workers, StreamPurpose::curves);
    CurveSet out;
    out.m_hat = reduce("m_hat", t_grid, replicas, [&](std::size_t i, std::size_t k) {
        return r[i].pop[k];
    });
    for (int ell = 1; ell <= ell_max; ++ell)
        out.I_hat[ell] = reduce("I_hat(" + std::to_string(ell) + ")", t_grid, replicas,
                                [&](std::size_t i, std::size_t k) {
                                    return static_cast<double>(r[i].pairs[k][ell - 1]);
                                });
    return out;
}

MomentIdentityReport check_moment_identity(const SimParams& p, const std::vector<double>& t_grid,
                                           int ell_max, std::size_t replicas, int workers,
                                           bool growth_only) {
    if (p.scale != TimeScale::speeded)
        throw ValidationError("the moment identity is checked on the speeded time scale");
    if (!growth_only && p.kernel.max_radius() > ell_max)
        throw ValidationError("ell_max " + std::to_string(ell_max) +
                              " is below the kernel radius " +
                              std::to_string(p.kernel.max_radius()));
    require_grid(t_grid);
    std::vector<double> grid = t_grid;
    if (grid.front() > 0) grid.insert(grid.begin(), 0.0);
    const int pairs_needed = growth_only ? 0 : ell_max;
    auto r = sample_curves(p, grid, pairs_needed, replicas, workers, StreamPurpose::moment);

    std::vector<double> pair_weight(static_cast<std::size_t>(pairs_needed), 0.0);
    for (int ell = 1; ell <= pairs_needed; ++ell)
        pair_weight[ell - 1] = (1 + p.theta / p.N) * p.kernel.weight(ell) /
                               static_cast<double>(shell_size(p.d, ell)) * p.N;

    const std::size_t K = grid.size();
    // Integrand theta m - sum (1 + theta/N)(p/h) N I per replica.
    auto integrand = [&](const ReplicaCurves& c) {
        std::vector<double> f(K);
        for (std::size_t k = 0; k < K; ++k) {
            double v = p.theta * c.pop[k];
            for (int ell = 1; ell <= pairs_needed; ++ell)
                v -= pair_weight[ell - 1] * static_cast<double>(c.pairs[k][ell - 1]);
            f[k] = v;
        }
        return f;
    };

    std::vector<RunningStats> stats(K);
    std::vector<double> mean_f(K, 0.0);
    for (const auto& c : r) {
        auto f = integrand(c);
        auto F = cumulative_trapezoid(grid, f);
        for (std::size_t k = 0; k < K; ++k) {
            stats[k].add(c.pop[k] - 1 - F[k]);
            mean_f[k] += f[k] / static_cast<double>(r.size());
        }
    }
    const auto quad = richardson_error(grid, mean_f);

    MomentIdentityReport rep;
    rep.replicas = replicas;
    rep.growth_only = growth_only;
    for (std::size_t k = 0; k < K; ++k) {
        MomentRow row;
        row.t = grid[k];
        row.residual = stats[k].mean();
        row.sigma = stats[k].stderr_of_mean();
        row.z = row.sigma > 0 ? row.residual / row.sigma : 0.0;
        row.quadrature_error = quad[k];
        if (row.sigma > 0 ? std::abs(row.z) > 3 : row.residual != 0) rep.within_3sigma = false;
        rep.max_abs_z = std::max(rep.max_abs_z, std::abs(row.z));
        if (row.quadrature_error > 0.5 * row.sigma && row.quadrature_error > 0)
            rep.warnings.push_back("quadrature error " + fmt(row.quadrature_error) +
                                   " exceeds half of sigma_R " + fmt(row.sigma) + " at t = " +
                                   fmt(row.t));
        rep.rows.push_back(row);
    }
    return rep;
}

DecayReport check_decay_bound(const SimParams& p, const std::vector<double>& t_grid,
                              std::size_t replicas, int workers, int n_floor,
                              std::optional<double> vartheta) {
    if (p.scale != TimeScale::speeded)
        throw ValidationError("the decay bound is checked on the speeded time scale");
    const double vt = vartheta ? *vartheta : theta(p.kernel, 1e-8).value;
    if (!(p.theta < vt))
        throw ValidationError("theta = " + fmt(p.theta) + " must be below vartheta = " + fmt(vt));
    auto r = sample_curves(p, t_grid, 0, replicas, workers, StreamPurpose::decay);
    auto m = reduce("m_hat", t_grid, replicas, [&](std::size_t i, std::size_t k) {
        return r[i].pop[k];
    });

    DecayReport rep;
    rep.vartheta = vt;
    rep.replicas = replicas;
    rep.below_floor = p.N < n_floor;
    rep.note =
        "the bound is guaranteed only for N above a non-explicit threshold; violations are "
        "reported, not failed";
    std::size_t peak = 0;
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        DecayRow row;
        row.t = t_grid[k];
        row.m_hat = m.means[k];
        row.std_error = m.stderrs[k];
        row.envelope = std::exp((p.theta - vt) * row.t / 2 + 2);
        row.margin = row.envelope - row.m_hat;
        row.violated = row.m_hat - 3 * row.std_error > row.envelope;
        rep.violations += row.violated;
        if (row.m_hat > m.means[peak]) peak = k;
        rep.rows.push_back(row);
    }
    const std::size_t last = t_grid.size() - 1;
    rep.decreasing_trend =
        m.means[last] + 3 * std::hypot(m.stderrs[last], m.stderrs[peak]) < m.means[peak];
    return rep;
}

}  // namespace stircp
