#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stircp/green.hpp"
#include "stircp/kernel.hpp"
#include "stircp/lattice.hpp"
#include "stircp/rng.hpp"

namespace stircp {

// Unit shell phi, second shell phi^2 and the neighbour structure between them.
struct NeighborhoodAtlas {
    int d = 0;
    std::vector<Point> phi;
    std::vector<Point> second;
    // A(x) = phi ∩ (x + phi) for every second-shell x.
    std::map<Point, std::vector<Point>> A_of;
    // For x in phi, the unique second-shell neighbour with |A| = 1.
    std::map<Point, Point> z_of;
    std::set<Point> J1, J2;

    bool in_J1(const Point& x) const { return J1.count(x) > 0; }
};

NeighborhoodAtlas build_atlas(int d);

struct AtlasCheck {
    bool ok = true;
    std::vector<std::string> failures;
};

// Brute-force check that every x in phi has exactly one second-shell
// neighbour with |A| = 1, equal to 2x, that all others have |A| = 2, and that
// J1 and J2 partition the second shell.
AtlasCheck verify_atlas(const NeighborhoodAtlas& atlas);

enum class WalkType { V, W };
std::string to_string(WalkType t);
WalkType parse_walk_type(const std::string& s);

struct WalkKind {
    WalkType type = WalkType::V;
    int d = 3;
    double N = 1;

    // Total jump rate out of x.
    double rate(const Point& x) const;
};

struct WalkStep {
    double holding = 0;
    Point next;
};

// One jump of V (uniform neighbour at rate 4dN^2) or W (from x in phi: to -x
// at rate N^2, to each of the 2d-1 points of x + phi other than the origin at
// rate 2N^2; elsewhere as V).
WalkStep walk_step(const WalkKind& kind, const Point& x, Stream& rng);

struct ExitDistribution {
    double p_J1 = 0;
    double p_J2 = 0;
    double std_error = 0;
    std::size_t replicas = 0;
    std::size_t censored = 0;
    std::size_t J1_count = 0;
    std::size_t J2_count = 0;
};

inline constexpr std::uint64_t kExitStepCap = 10'000'000;

// First exit class from phi ∪ {0} for walks started at `start` in phi.
// Replicas that hit the step cap are reported as censored and excluded.
ExitDistribution exit_distribution(WalkType type, int d, const Point& start,
                                   std::size_t replicas, std::uint64_t seed, int workers,
                                   std::uint64_t step_cap = kExitStepCap);

struct OccupationEstimate {
    double mean = 0;
    double std_error = 0;
    std::size_t replicas = 0;
};

// E int_0^t 1{X_s in shell ell} ds for the continuous-time walk. Simulated
// with N = 1 on the time axis scaled by N^2.
OccupationEstimate occupation_time(WalkType type, int d, double N, int ell, double t,
                                   const Point& start, std::size_t replicas,
                                   std::uint64_t seed, int workers);

// Same quantity for V written as a discrete walk D_n read at a rate-1
// Poisson clock pi(4dN^2 s), with the step path and the clock drawn from
// separate sources.
OccupationEstimate poissonized_occupation(int d, double N, int ell, double t,
                                          const Point& start, std::size_t replicas,
                                          std::uint64_t seed, int workers);

struct Z1Value {
    int ell = 0;
    double value = 0;            // product formula with the F_1 prefactor
    double exact_split_law = 0;  // split time weighted by its exact law
    double tail_bound = 0;
    int n_max = 0;
    double tau = 0;
};

// E[Z_1^ell] from the product formula
//   P(F_1) (1/T) sum_n q_n(ell) P(n+1, T),  T = 4dN^2 tau,
// q_n(ell) = P(L + D_n in shell ell). tau defaults to ln N / N^2.
Z1Value z1_semianalytic(int d, double N, double theta, const BranchKernel& k, int ell,
                        double tol, std::optional<double> tau = std::nullopt);

// All radii in the kernel support at once, sharing one shell-hitting table.
std::map<int, Z1Value> z1_semianalytic_all(double N, double theta, const BranchKernel& k,
                                           double tol, std::optional<double> tau = std::nullopt);

// Monte Carlo version of the same formula: r uniform on [0, T], n ~ Poisson(r),
// then L + D_n.
OccupationEstimate z1_monte_carlo(double N, double theta, const BranchKernel& k, int ell,
                                  std::size_t replicas, std::uint64_t seed, int workers);

struct ThetaLimitRow {
    double N = 0;  // infinity for the limit row
    double estimate = 0;          // 2N sum_ell (p/h) E[Z_1^ell]
    double exact_split_law = 0;   // same with the exact split-time law
    double bound = 0;             // 2(1+theta) sum_ell (p/h) sum_n q_n(ell)
    double theta_ref = 0;
    double relative_gap = 0;      // |estimate - theta_ref| / theta_ref
};

struct ThetaLimitTable {
    int d = 0;
    BranchKernel kernel = BranchKernel::nearest_neighbor(3);
    double theta_param = 0;  // branching excess used in the prefactors
    double tol = 0;
    std::vector<ThetaLimitRow> rows;
    ThetaLimitRow limit;
    bool bound_holds = true;
    // Distance to the reference decreases over the last three rows.
    bool monotone_tail = true;
};

ThetaLimitTable theta_limit_table(const BranchKernel& k, const std::vector<double>& N_list,
                                  double tol, double theta_param = 0.0);

}  // namespace stircp
