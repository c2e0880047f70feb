#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stircp/numerics.hpp"
#include "stircp/simulator.hpp"

namespace stircp {

inline constexpr std::size_t kDefaultPopCap = 500;
inline constexpr double kDefaultTMax = 50.0;

StopRule default_proxy();

struct OutcomeCounts {
    std::size_t extinct = 0;
    std::size_t capped = 0;
    std::size_t horizon_alive = 0;
};

struct SurvivalEstimate {
    double rho_hat = 0;
    Interval ci;
    std::size_t replicas = 0;
    std::size_t survived = 0;
    StopRule proxy;
    OutcomeCounts censoring;
};

// Survival means ending capped, or at the horizon with particles left.
SurvivalEstimate survival_prob(const SimParams& p, const StopRule& proxy, std::size_t replicas,
                               int workers, StreamPurpose purpose = StreamPurpose::survival);

struct LambdaCOptions {
    double threshold = 0.05;
    // When set, the threshold is this value divided by N. Branching-walk
    // survival is about theta/N, so a fixed threshold shifts the crossing
    // by an amount growing with N.
    std::optional<double> threshold_times_N;
    std::size_t replicas = 200;
    double lambda_lo = 1.0;
    double lambda_hi = 3.0;
    // Bracket width at which to stop; 0 means 0.02 / N.
    double resolution = 0;
    int max_probes = 40;
    int workers = 1;
};

struct LambdaProbe {
    double lambda = 0;
    double frequency = 0;
    std::size_t survived = 0;
    std::size_t replicas = 0;
};

struct LambdaCEstimate {
    int d = 0;
    int N = 0;
    BranchKernel kernel = BranchKernel::nearest_neighbor(3);
    double lambda_hat = 0;
    double lambda_lo = 0;
    double lambda_hi = 0;
    double threshold = 0;
    std::vector<LambdaProbe> probes;  // in probing order
    double scaled = 0;                // (lambda_hat - 1) N
    // Binomial noise at the threshold over the local slope of the frequency
    // curve, in scaled units. Infinite when the slope is not positive.
    double scaled_stderr = 0;
    bool converged = false;           // bracket reached the resolution
};

// Bisection on lambda = 1 + theta/N for the point where the survival
// frequency crosses the threshold. Every probe reuses the same replica
// streams, so frequencies are coupled across lambda.
LambdaCEstimate lambda_c_estimate(const SimParams& base, const StopRule& proxy,
                                  const LambdaCOptions& opts);

struct CurveEstimate {
    std::string quantity;  // "m_hat" or "I_hat(ell)"
    std::vector<double> times;
    std::vector<double> means;
    std::vector<double> stderrs;
    std::size_t replicas = 0;
};

struct CurveSet {
    CurveEstimate m_hat;
    std::map<int, CurveEstimate> I_hat;
};

CurveSet estimate_curves(const SimParams& p, const std::vector<double>& t_grid, int ell_max,
                         std::size_t replicas, int workers);

struct MomentRow {
    double t = 0;
    double residual = 0;
    double sigma = 0;
    double z = 0;  // residual / sigma, 0 when sigma = 0
    double quadrature_error = 0;
};

struct MomentIdentityReport {
    std::vector<MomentRow> rows;
    double max_abs_z = 0;
    bool within_3sigma = true;
    std::vector<std::string> warnings;
    std::size_t replicas = 0;
    bool growth_only = false;
};

// R(t) = m(t) - [1 + theta int m - (1 + theta/N) sum_ell (p/h) int N I^ell],
// evaluated per replica so that sigma_R accounts for the correlation between
// the terms. growth_only drops the pair term.
MomentIdentityReport check_moment_identity(const SimParams& p, const std::vector<double>& t_grid,
                                           int ell_max, std::size_t replicas, int workers,
                                           bool growth_only = false);

struct DecayRow {
    double t = 0;
    double m_hat = 0;
    double std_error = 0;
    double envelope = 0;  // exp((theta - vartheta) t / 2 + 2)
    double margin = 0;    // envelope - m_hat
    bool violated = false;
};

struct DecayReport {
    double vartheta = 0;
    std::vector<DecayRow> rows;
    std::size_t violations = 0;
    bool below_floor = false;
    // The last grid value sits more than 3 sigma below the peak.
    bool decreasing_trend = false;
    std::size_t replicas = 0;
    std::string note;
};

// One-sided check of m(t) <= exp((theta - vartheta) t / 2 + 2) with 3 sigma
// slack. Violations are reported, not thrown.
DecayReport check_decay_bound(const SimParams& p, const std::vector<double>& t_grid,
                              std::size_t replicas, int workers, int n_floor = 10,
                              std::optional<double> vartheta = std::nullopt);

}  // namespace stircp
