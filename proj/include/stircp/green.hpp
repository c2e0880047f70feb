#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "stircp/kernel.hpp"
#include "stircp/lattice.hpp"

namespace stircp {

inline constexpr std::size_t kDefaultBoxBytes = std::size_t{512} << 20;

// Throws ValidationError unless 3 <= d <= kMaxDim.
void require_transient(int d);

// Layers P^n(0, .) of the simple random walk on a box of radius n_max,
// advanced one step at a time by nearest-neighbour averaging. Only sites of
// the live parity are stored.
class WalkLayers {
public:
    WalkLayers(int d, int n_max, std::size_t memory_cap = kDefaultBoxBytes);

    void advance();
    int steps() const { return n_; }
    int d() const { return d_; }
    double at(const Point& x) const;
    double layer_sum() const;

private:
    long long index(const Point& x) const;

    int d_;
    int radius_;
    long long side_;
    std::vector<long long> stride_;
    std::vector<double> buf_[2];
    int n_ = 0;
};

// P^n(0, x) from the box layers. Throws ResourceError above the memory cap.
double nstep_prob(int d, const Point& x, int n, std::size_t memory_cap = kDefaultBoxBytes);

// P^n(0, x) for n = 0..n_max, exact up to rounding, by splitting the steps
// over coordinate blocks with binomial weights.
std::vector<double> nstep_series(int d, const Point& x, int n_max);

// Local-CLT approximation 2 (d / 2 pi n)^{d/2} exp(-d |x|^2 / 2n), valid on
// the parity class of x.
double clt_mass(int d, const Point& x, double n);
// Sum of clt_mass over n > n_max with n = |x|_1 mod 2.
double clt_tail(int d, const Point& x, int n_max);
// Same sum weighted by n^{-k}.
double clt_tail_moment(int d, const Point& x, int n_max, int k);

// Sum over n of a walk series truncated at n_max plus the local-CLT tail.
struct SeriesSum {
    double partial = 0;
    double tail = 0;
    double error_bound = 0;
    int n_max = 0;
    double value() const { return partial + tail; }
};

// Partial sum and tail for one site given its exact series up to n_max.
// The tail carries a fitted a/n + b/n^2 relative correction; the error
// bound is twice the change between first- and second-order corrections.
SeriesSum sum_with_tail(int d, const Point& x, const std::vector<double>& series);

struct GreenValue {
    double value = 0;
    double error_bound = 0;
    double tol = 0;
    int n_max = 0;  // 0 for the integral route
    std::string method;
};

// Memoized G(0, x) by the walk-sum route, keyed on the canonical site.
class GreenTable {
public:
    GreenTable(int d, double tol);
    const GreenValue& get(const Point& x);
    int d() const { return d_; }
    double tol() const { return tol_; }
    int n_max() const { return n_max_used_; }

private:
    int d_;
    double tol_;
    int n_max_used_ = 0;
    std::map<Point, GreenValue> memo_;
};

GreenValue green(int d, const Point& x, const Point& y, double tol);
// Cross-check route: int_0^inf prod_i e^{-t/d} I_{x_i}(t/d) dt.
GreenValue green_integral(int d, const Point& x, const Point& y, double tol);

// P(L + D_n in shell ell) for n = 0..n_max where L has the kernel law and D_n
// is the simple random walk, with the tail of its sum over n.
class ShellHitting {
public:
    ShellHitting(const BranchKernel& k, std::vector<int> ells, int n_max);
    // Doubles n_max until sum_ell weight[ell] * tail_bound(ell) <= budget.
    static ShellHitting for_budget(const BranchKernel& k, std::vector<int> ells,
                                   const std::map<int, double>& weight, double budget,
                                   int n_start = 256);

    int n_max() const { return n_max_; }
    const std::vector<double>& q(int ell) const { return q_.at(ell); }
    double tail(int ell) const { return tail_.at(ell); }
    double tail_bound(int ell) const { return bound_.at(ell); }
    double total(int ell) const;

private:
    int n_max_;
    std::map<int, std::vector<double>> q_;
    std::map<int, double> tail_, bound_;
};

enum class ThetaMethod { kernel_green, walk_sum };
std::string to_string(ThetaMethod m);

struct ThetaResult {
    double value = 0;
    ThetaMethod method = ThetaMethod::kernel_green;
    double tol = 0;
    double error_bound = 0;
    int d = 0;
    BranchKernel kernel = BranchKernel::nearest_neighbor(3);
    int n_max = 0;
};

ThetaResult theta(const BranchKernel& k, double tol);
ThetaResult theta_via_walk_sum(const BranchKernel& k, double tol);
// Walk-sum partial sum over n <= n_max with no tail.
double theta_walk_partial(const BranchKernel& k, int n_max);
double theta_nn(int d, double tol);

struct AsymptoticsRow {
    int N = 0;
    double phi = 0;              // 1/N
    double lower_constant = 0;   // 1/(2d(2d-1))
    double upper_constant = 0;   // (G(0,0)-1)/(2d)
    double theta = 0;            // kernel constant
    double lambda_pred = 0;      // 1 + theta/N
    double lambda_lower = 0;     // 1 + lower/N
    double lambda_upper = 0;     // 1 + upper/N
};

struct AsymptoticsReport {
    int d = 0;
    BranchKernel kernel = BranchKernel::nearest_neighbor(3);
    double green_origin = 0;
    std::vector<AsymptoticsRow> rows;
    // Low-dimensional reference scalings printed for comparison only.
    std::vector<std::string> low_dim_notes;
};

AsymptoticsReport asymptotics_report(const BranchKernel& k, const std::vector<int>& N_list,
                                     double tol = 1e-6);

}  // namespace stircp
