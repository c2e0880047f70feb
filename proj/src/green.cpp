#include "stircp/green.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_bessel.h>
#include <gsl/gsl_sf_gamma.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "stircp/errors.hpp"
#include "stircp/numerics.hpp"

namespace stircp {

void require_transient(int d) {
    if (d < 3 || d > kMaxDim)
        throw ValidationError("Green function needs 3 <= d <= " + std::to_string(kMaxDim) +
                              " (got d=" + std::to_string(d) + "; the sum diverges for d < 3)");
}

namespace {

constexpr int kMaxSeriesLength = 1 << 18;

// 1-D walk: P^m(0, k) = C(m, (m+k)/2) / 2^m.
std::vector<double> axis_series(int k, int m_max) {
    k = std::abs(k);
    std::vector<double> s(static_cast<std::size_t>(m_max) + 1, 0.0);
    if (k > m_max) return s;
    double v = std::ldexp(1.0, -k);
    s[k] = v;
    for (int m = k; m + 2 <= m_max; m += 2) {
        double up = (m + 2 + k) / 2;
        double dn = (m + 2 - k) / 2;
        v *= static_cast<double>(m + 1) * (m + 2) / (4.0 * up * dn);
        s[m + 2] = v;
    }
    return s;
}

// 2-D walk through the rotation (a, b) -> (a + b, a - b), which turns it
// into two independent 1-D walks.
std::vector<double> plane_series(int a, int b, int m_max) {
    auto u = axis_series(a + b, m_max);
    auto v = axis_series(a - b, m_max);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] *= v[i];
    return u;
}

// out[n] = sum_k Binom(n, k; q) a[k] b[n - k]: each step goes to the first
// block with probability q.
std::vector<double> allocate_steps(const std::vector<double>& a, const std::vector<double>& b,
                                   double q, int n_max) {
    std::vector<double> out(static_cast<std::size_t>(n_max) + 1, 0.0);
    const double odds_up = q / (1 - q);
    const double odds_dn = (1 - q) / q;
    const double lq = std::log(q), lp = std::log1p(-q);
    for (int n = 0; n <= n_max; ++n) {
        int mode = std::min(n, static_cast<int>(std::floor((n + 1) * q)));
        double pm = std::exp(std::lgamma(n + 1.0) - std::lgamma(mode + 1.0) -
                             std::lgamma(n - mode + 1.0) + mode * lq + (n - mode) * lp);
        const double cut = pm * 1e-30;
        KahanSum acc;
        double pk = pm;
        for (int k = mode; k <= n && pk >= cut; ++k) {
            acc.add(pk * a[k] * b[n - k]);
            pk *= static_cast<double>(n - k) / (k + 1) * odds_up;
        }
        pk = pm;
        for (int k = mode - 1; k >= 0; --k) {
            pk *= static_cast<double>(k + 1) / (n - k) * odds_dn;
            if (pk < cut) break;
            acc.add(pk * a[k] * b[n - k]);
        }
        out[n] = acc.value();
    }
    return out;
}

std::vector<double> block_series(int d, const int* x, int n_max) {
    if (d == 1) return axis_series(x[0], n_max);
    if (d == 2) return plane_series(x[0], x[1], n_max);
    if (d % 2 == 1) {
        auto a = axis_series(x[0], n_max);
        auto b = block_series(d - 1, x + 1, n_max);
        return allocate_steps(a, b, 1.0 / d, n_max);
    }
    auto a = plane_series(x[0], x[1], n_max);
    auto b = block_series(d - 2, x + 2, n_max);
    return allocate_steps(a, b, 2.0 / d, n_max);
}

void gsl_quiet() {
    static const bool once = [] {
        gsl_set_error_handler_off();
        return true;
    }();
    (void)once;
}

struct BesselIntegrand {
    int d;
    std::array<int, kMaxDim> orders;
    double t0;

    double at_t(double t) const {
        double prod = 1.0;
        for (int i = 0; i < d; ++i) {
            gsl_sf_result r;
            int status = gsl_sf_bessel_In_scaled_e(orders[i], t / d, &r);
            if (status == GSL_EUNDRFLW) return 0.0;
            if (status) throw ResourceError("Bessel evaluation failed at t=" + std::to_string(t));
            prod *= r.val;
            if (prod == 0) return 0.0;
        }
        return prod;
    }
};

double head_fn(double t, void* p) { return static_cast<BesselIntegrand*>(p)->at_t(t); }

// t = t0 / u^2 maps [t0, inf) onto (0, 1].
double tail_fn(double u, void* p) {
    auto* f = static_cast<BesselIntegrand*>(p);
    if (u <= 0) return 0.0;
    double t = f->t0 / (u * u);
    return f->at_t(t) * 2.0 * f->t0 / (u * u * u);
}

}  // namespace

// ---------------------------------------------------------------------------

WalkLayers::WalkLayers(int d, int n_max, std::size_t memory_cap) : d_(d), radius_(n_max) {
    check_dimension(d);
    if (n_max < 0) throw ValidationError("step count must be >= 0");
    side_ = 2LL * n_max + 3;  // one padding layer each side
    double cells = std::pow(static_cast<double>(side_), d);
    double bytes = cells * sizeof(double);
    if (bytes > static_cast<double>(memory_cap))
        throw ResourceError("walk box for n=" + std::to_string(n_max) + " in d=" +
                            std::to_string(d) + " needs " + std::to_string(bytes / (1 << 20)) +
                            " MiB, above the cap of " + std::to_string(memory_cap >> 20) + " MiB");
    stride_.resize(d);
    long long s = 1;
    for (int i = 0; i < d; ++i) {
        stride_[i] = s;
        s *= side_;
    }
    auto half = static_cast<std::size_t>((s + 1) / 2);
    buf_[0].assign(half, 0.0);
    buf_[1].assign(half, 0.0);
    Point origin;
    long long c = index(origin);
    buf_[c & 1][static_cast<std::size_t>(c >> 1)] = 1.0;
}

long long WalkLayers::index(const Point& x) const {
    long long c = 0;
    for (int i = 0; i < d_; ++i) c += (x[i] + radius_ + 1) * stride_[i];
    return c;
}

void WalkLayers::advance() {
    if (n_ >= radius_) throw ResourceError("walk box exhausted at n=" + std::to_string(n_));
    ++n_;
    // Every site of the new layer has linear index parity `par` because the
    // side length is odd.
    Point origin;
    const int par = static_cast<int>((index(origin) + n_) & 1);
    const std::vector<double>& src = buf_[par ^ 1];
    std::vector<double>& dst = buf_[par];
    const double w = 1.0 / (2 * d_);
    const long long lo = 1, hi = side_ - 2;

    std::vector<long long> coord(static_cast<std::size_t>(d_), lo);
    while (true) {
        long long base = 0;
        for (int i = 1; i < d_; ++i) base += coord[i] * stride_[i];
        long long c0 = lo;
        if (((base + c0) & 1) != par) ++c0;
        for (; c0 <= hi; c0 += 2) {
            long long L = base + c0;
            double acc = src[static_cast<std::size_t>((L - 1) >> 1)] +
                         src[static_cast<std::size_t>((L + 1) >> 1)];
            for (int i = 1; i < d_; ++i) {
                acc += src[static_cast<std::size_t>((L - stride_[i]) >> 1)];
                acc += src[static_cast<std::size_t>((L + stride_[i]) >> 1)];
            }
            dst[static_cast<std::size_t>(L >> 1)] = acc * w;
        }
        int i = 1;
        for (; i < d_; ++i) {
            if (++coord[i] <= hi) break;
            coord[i] = lo;
        }
        if (i >= d_) break;
    }
}

double WalkLayers::at(const Point& x) const {
    auto norm = l1_norm(x);
    if (norm > n_ || ((norm ^ n_) & 1)) return 0.0;
    long long c = index(x);
    return buf_[c & 1][static_cast<std::size_t>(c >> 1)];
}

double WalkLayers::layer_sum() const {
    Point origin;
    const int par = static_cast<int>((index(origin) + n_) & 1);
    KahanSum s;
    for (double v : buf_[par]) s.add(v);
    return s.value();
}

double nstep_prob(int d, const Point& x, int n, std::size_t memory_cap) {
    check_dimension(d);
    if (n < 0) throw ValidationError("step count must be >= 0");
    auto norm = l1_norm(x);
    if (norm > n || ((norm ^ n) & 1)) return 0.0;
    WalkLayers layers(d, n, memory_cap);
    for (int i = 0; i < n; ++i) layers.advance();
    return layers.at(x);
}

std::vector<double> nstep_series(int d, const Point& x, int n_max) {
    check_dimension(d);
    if (n_max < 0) throw ValidationError("step count must be >= 0");
    if (n_max > kMaxSeriesLength)
        throw ResourceError("series length " + std::to_string(n_max) + " above the limit " +
                            std::to_string(kMaxSeriesLength));
    Point c = canonical(x, d);
    return block_series(d, c.c.data(), n_max);
}

double clt_mass(int d, const Point& x, double n) {
    double r2 = static_cast<double>(squared_norm(x));
    return 2.0 * std::pow(d / (2.0 * std::numbers::pi * n), d / 2.0) * std::exp(-d * r2 / (2.0 * n));
}

double clt_tail(int d, const Point& x, int n_max) { return clt_tail_moment(d, x, n_max, 0); }

double clt_tail_moment(int d, const Point& x, int n_max, int k) {
    require_transient(d);
    const int par = static_cast<int>(l1_norm(x) & 1);
    int n0 = n_max + 1;
    if ((n0 & 1) != par) ++n0;
    const double a = d * static_cast<double>(squared_norm(x)) / 2.0;
    const double s = d / 2.0 - 1.0 + k;
    const double c = 2.0 * std::pow(d / (2.0 * std::numbers::pi), d / 2.0);
    double integral;
    if (a == 0) {
        integral = c * std::pow(n0, -s) / s;
    } else {
        integral = c * std::pow(a, -s) * gsl_sf_gamma(s) * gsl_sf_gamma_inc_P(s, a / n0);
    }
    // Euler-Maclaurin over n0, n0 + 2, ...
    double f0 = clt_mass(d, x, n0) * std::pow(n0, -k);
    double f1 = f0 * (-(d / 2.0 + k) / n0 + a / (static_cast<double>(n0) * n0));
    return integral / 2.0 + f0 / 2.0 - 2.0 * f1 / 12.0;
}

SeriesSum sum_with_tail(int d, const Point& x, const std::vector<double>& series) {
    require_transient(d);
    SeriesSum out;
    out.n_max = static_cast<int>(series.size()) - 1;
    KahanSum acc;
    for (double v : series) acc.add(v);
    out.partial = acc.value();
    const int M = out.n_max;
    out.tail = clt_tail(d, x, M);
    out.error_bound = std::numeric_limits<double>::infinity();
    if (M < 16) return out;

    // Relative deviation r_n = P^n / clt - 1 behaves like a/n + b/n^2.
    // Fit it on [M/2, M] by least squares in u = 1/n.
    const int par = static_cast<int>(l1_norm(x) & 1);
    double s22 = 0, s23 = 0, s33 = 0, s2r = 0, s3r = 0;
    std::vector<std::pair<double, double>> pts;
    for (int n = M / 2; n <= M; ++n) {
        if ((n & 1) != par || series[n] <= 0) continue;
        double u = 1.0 / n;
        double r = series[n] / clt_mass(d, x, n) - 1.0;
        pts.emplace_back(u, r);
        s22 += u * u;
        s23 += u * u * u;
        s33 += u * u * u * u;
        s2r += u * r;
        s3r += u * u * r;
    }
    if (pts.size() < 4) return out;
    const double det = s22 * s33 - s23 * s23;
    const double a = (s2r * s33 - s3r * s23) / det;
    const double b = (s22 * s3r - s23 * s2r) / det;
    double resid = 0;
    for (auto [u, r] : pts) resid = std::max(resid, std::abs(r - a * u - b * u * u));
    // First-order model through the last point, used only to size the error.
    const double a1 = pts.back().second / pts.back().first;

    const double t1 = clt_tail_moment(d, x, M, 1);
    const double t2 = clt_tail_moment(d, x, M, 2);
    const double second = a * t1 + b * t2;
    const double first = a1 * t1;
    out.tail += second;

    const double k = d / 2.0;
    const double em = 8.0 * clt_mass(d, x, M + 1) * k * (k + 1) * (k + 2) /
                      (720.0 * std::pow(M + 1.0, 3));
    out.error_bound = 2.0 * std::abs(second - first) + resid * out.tail + em;
    return out;
}

// ---------------------------------------------------------------------------

GreenTable::GreenTable(int d, double tol) : d_(d), tol_(tol) {
    require_transient(d);
    if (!(tol > 0)) throw ValidationError("tolerance must be positive");
}

const GreenValue& GreenTable::get(const Point& x) {
    Point key = canonical(x, d_);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;

    int M = 256;
    while (true) {
        auto series = nstep_series(d_, key, M);
        SeriesSum s = sum_with_tail(d_, key, series);
        if (s.error_bound <= tol_ / 2) {
            n_max_used_ = std::max(n_max_used_, M);
            GreenValue g{s.value(), s.error_bound, tol_, M, "dp"};
            return memo_.emplace(key, g).first->second;
        }
        if (M >= kMaxSeriesLength)
            throw ResourceError("Green series did not reach tolerance " + std::to_string(tol_) +
                                " by n=" + std::to_string(M));
        M *= 2;
    }
}

GreenValue green(int d, const Point& x, const Point& y, double tol) {
    GreenTable table(d, tol);
    return table.get(y - x);
}

GreenValue green_integral(int d, const Point& x, const Point& y, double tol) {
    require_transient(d);
    if (!(tol > 0)) throw ValidationError("tolerance must be positive");
    gsl_quiet();
    Point z = canonical(y - x, d);
    BesselIntegrand f{d, {}, 0};
    for (int i = 0; i < d; ++i) f.orders[i] = z[i];
    f.t0 = std::max(50.0, 4.0 * static_cast<double>(squared_norm(z)));

    constexpr std::size_t kLimit = 2000;
    std::unique_ptr<gsl_integration_workspace, decltype(&gsl_integration_workspace_free)> ws(
        gsl_integration_workspace_alloc(kLimit), gsl_integration_workspace_free);
    gsl_function head{&head_fn, &f};
    gsl_function tail{&tail_fn, &f};
    double v1, e1, v2, e2;
    int s1 = gsl_integration_qag(&head, 0.0, f.t0, tol / 4, 1e-12, kLimit, GSL_INTEG_GAUSS41,
                                 ws.get(), &v1, &e1);
    int s2 = gsl_integration_qag(&tail, 0.0, 1.0, tol / 4, 1e-12, kLimit, GSL_INTEG_GAUSS41,
                                 ws.get(), &v2, &e2);
    double err = e1 + e2;
    if ((s1 || s2) && err > tol)
        throw ResourceError("Green integral did not converge (error estimate " +
                            std::to_string(err) + ")");
    return GreenValue{v1 + v2, err, tol, 0, "integral"};
}

// ---------------------------------------------------------------------------

ShellHitting::ShellHitting(const BranchKernel& k, std::vector<int> ells, int n_max)
    : n_max_(n_max) {
    const int d = k.dim();
    require_transient(d);
    std::map<Point, std::vector<double>> series;
    std::map<Point, SeriesSum> sums;

    for (int ell : ells) {
        if (ell < 1) throw ValidationError("shell radius must be >= 1");
        std::map<Point, double> coef;
        Shell target = shell_points(d, ell);
        for (int r : k.support()) {
            double w = k.weight(r) / static_cast<double>(shell_size(d, r));
            for (const Point& x : shell_points(d, r).points)
                for (const Point& y : target.points) coef[canonical(y - x, d)] += w;
        }
        std::vector<double> q(static_cast<std::size_t>(n_max) + 1, 0.0);
        double tail = 0, bound = 0;
        for (auto& [z, c] : coef) {
            auto it = series.find(z);
            if (it == series.end()) {
                it = series.emplace(z, nstep_series(d, z, n_max)).first;
                sums.emplace(z, sum_with_tail(d, z, it->second));
            }
            const auto& s = it->second;
            for (int n = 0; n <= n_max; ++n) q[n] += c * s[n];
            tail += c * sums.at(z).tail;
            bound += c * sums.at(z).error_bound;
        }
        q_[ell] = std::move(q);
        tail_[ell] = tail;
        bound_[ell] = bound;
    }
}

ShellHitting ShellHitting::for_budget(const BranchKernel& k, std::vector<int> ells,
                                      const std::map<int, double>& weight, double budget,
                                      int n_start) {
    int M = n_start;
    while (true) {
        ShellHitting h(k, ells, M);
        double total = 0;
        for (int ell : ells) total += weight.at(ell) * h.tail_bound(ell);
        if (total <= budget) return h;
        if (M >= kMaxSeriesLength)
            throw ResourceError("shell hitting series did not reach tolerance by n=" +
                                std::to_string(M));
        M *= 2;
    }
}

double ShellHitting::total(int ell) const {
    KahanSum s;
    for (double v : q_.at(ell)) s.add(v);
    return s.value() + tail_.at(ell);
}

std::string to_string(ThetaMethod m) {
    return m == ThetaMethod::kernel_green ? "kernel-green" : "walk-sum";
}

ThetaResult theta(const BranchKernel& k, double tol) {
    const int d = k.dim();
    require_transient(d);
    if (!(tol > 0)) throw ValidationError("tolerance must be positive");
    std::vector<std::pair<Point, double>> mass;
    for (int r : k.support()) {
        double w = k.weight(r) / static_cast<double>(shell_size(d, r));
        for (const Point& x : shell_points(d, r).points) mass.emplace_back(x, w);
    }
    std::map<Point, GreenValue> memo;
    KahanSum acc;
    double err = 0;
    for (const auto& [x, wx] : mass) {
        for (const auto& [y, wy] : mass) {
            Point key = canonical(y - x, d);
            auto it = memo.find(key);
            if (it == memo.end()) it = memo.emplace(key, green_integral(d, Point{}, key, tol)).first;
            acc.add(wx * wy * it->second.value);
            err += wx * wy * it->second.error_bound;
        }
    }
    ThetaResult r;
    r.value = acc.value() / (2 * d);
    r.method = ThetaMethod::kernel_green;
    r.tol = tol;
    r.error_bound = err / (2 * d);
    r.d = d;
    r.kernel = k;
    r.n_max = 0;
    return r;
}

ThetaResult theta_via_walk_sum(const BranchKernel& k, double tol) {
    const int d = k.dim();
    require_transient(d);
    if (!(tol > 0)) throw ValidationError("tolerance must be positive");
    auto ells = k.support();
    std::map<int, double> weight;
    for (int ell : ells)
        weight[ell] = k.weight(ell) / static_cast<double>(shell_size(d, ell)) / (2 * d);
    ShellHitting h = ShellHitting::for_budget(k, ells, weight, tol / 2);

    KahanSum acc;
    for (int n = 0; n <= h.n_max(); ++n)
        for (int ell : ells) acc.add(weight[ell] * h.q(ell)[n]);
    double err = 0;
    for (int ell : ells) {
        acc.add(weight[ell] * h.tail(ell));
        err += weight[ell] * h.tail_bound(ell);
    }
    ThetaResult r;
    r.value = acc.value();
    r.method = ThetaMethod::walk_sum;
    r.tol = tol;
    r.error_bound = err;
    r.d = d;
    r.kernel = k;
    r.n_max = h.n_max();
    return r;
}

double theta_walk_partial(const BranchKernel& k, int n_max) {
    const int d = k.dim();
    require_transient(d);
    auto ells = k.support();
    ShellHitting h(k, ells, n_max);
    KahanSum acc;
    for (int n = 0; n <= n_max; ++n)
        for (int ell : ells)
            acc.add(k.weight(ell) / static_cast<double>(shell_size(d, ell)) * h.q(ell)[n]);
    return acc.value() / (2 * d);
}

double theta_nn(int d, double tol) {
    return (green(d, Point{}, Point{}, tol).value - 1.0) / (2 * d);
}

AsymptoticsReport asymptotics_report(const BranchKernel& k, const std::vector<int>& N_list,
                                     double tol) {
    const int d = k.dim();
    require_transient(d);
    AsymptoticsReport rep;
    rep.d = d;
    rep.kernel = k;
    rep.green_origin = green(d, Point{}, Point{}, tol).value;
    const double lower = 1.0 / (2.0 * d * (2.0 * d - 1.0));
    const double upper = (rep.green_origin - 1.0) / (2 * d);
    const double th = theta_via_walk_sum(k, tol).value;
    for (int N : N_list) {
        if (N < 1) throw ValidationError("N must be >= 1");
        AsymptoticsRow row;
        row.N = N;
        row.phi = 1.0 / N;
        row.lower_constant = lower;
        row.upper_constant = upper;
        row.theta = th;
        row.lambda_pred = 1.0 + th / N;
        row.lambda_lower = 1.0 + lower / N;
        row.lambda_upper = 1.0 + upper / N;
        rep.rows.push_back(row);
    }
    rep.low_dim_notes = {
        "d=1: lambda_c - 1 ~ C N^{-2/3}",
        "d=2: lambda_c - 1 ~ C log(N) / N",
    };
    return rep;
}

}  // namespace stircp
