#pragma once

#include <absl/container/flat_hash_map.h>

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stircp/kernel.hpp"
#include "stircp/lattice.hpp"
#include "stircp/rng.hpp"

namespace stircp {

enum class TimeScale { original, speeded };
std::string to_string(TimeScale s);
TimeScale parse_time_scale(const std::string& s);

struct StopRule {
    std::optional<double> t_max;
    std::optional<std::size_t> pop_cap;

    void validate() const;
    friend bool operator==(const StopRule&, const StopRule&) = default;
};

struct SimParams {
    int d = 3;
    int N = 10;
    double theta = 0.0;
    BranchKernel kernel = BranchKernel::nearest_neighbor(3);
    TimeScale scale = TimeScale::speeded;
    bool suppression = true;
    bool genealogy = false;
    // Test harness switch: only stirring, no deaths or splits.
    bool stirring_only = false;
    std::uint64_t seed = 0;
    StopRule stop;

    double lambda() const { return 1.0 + theta / N; }
    double death_rate() const;
    double split_rate() const;
    // Exchange proposal rate per particle and neighbour direction.
    double exchange_rate() const;
    // ln N / N^2, the window used by the pair statistics.
    double tau() const;
    // Yule growth rate 2 + theta/N + 2dN on the original scale.
    double yule_rate() const;

    void validate() const;
};

enum class EndKind { alive, death, split, suppressed };
std::string to_string(EndKind k);

struct ParticleRecord {
    // Root particles carry (1), (2), ...; children append 0 (stays) or 1 (newborn).
    std::vector<std::uint8_t> label;
    std::optional<std::uint32_t> parent;
    std::optional<std::uint32_t> child0;
    std::optional<std::uint32_t> child1;
    double birth_time = 0;
    double end_time = std::numeric_limits<double>::infinity();
    EndKind end = EndKind::alive;
};

std::string label_string(const std::vector<std::uint8_t>& label);

enum class EventKind { death, split, suppressed_birth, move, swap, blocked };
std::string to_string(EventKind k);

struct AppliedEvent {
    EventKind kind = EventKind::blocked;
    double time = 0;
    Point from;
    Point to;
};

struct EventCounts {
    std::uint64_t deaths = 0;
    std::uint64_t splits = 0;  // includes splits whose newborn was suppressed
    std::uint64_t suppressed_births = 0;
    std::uint64_t moves = 0;
    std::uint64_t swaps = 0;
    std::uint64_t blocked = 0;  // exchange proposals that changed nothing
    friend bool operator==(const EventCounts&, const EventCounts&) = default;
};

enum class Outcome { extinct, capped, horizon };
std::string to_string(Outcome o);

// State observations at fixed times during run_until.
struct Sampling {
    std::vector<double> times;  // sorted, >= current clock
    int ell_max = 0;            // pair counts for radii 1..ell_max
};

struct TrajectorySummary {
    Outcome outcome = Outcome::horizon;
    double final_time = 0;
    std::size_t final_population = 0;
    std::size_t peak_population = 0;
    EventCounts counts;
    // Leading sample times that were reached; later ones were cut off by a cap.
    std::size_t observed = 0;
    std::vector<double> population_at;
    std::vector<std::vector<std::uint64_t>> pairs_at;  // [sample][ell - 1]
    friend bool operator==(const TrajectorySummary&, const TrajectorySummary&) = default;
};

// Exact event-driven simulation of the stirred contact process.
class ContactProcess {
public:
    // One particle labelled (1) at the origin.
    explicit ContactProcess(const SimParams& p, std::uint64_t replica = 0,
                            StreamPurpose purpose = StreamPurpose::simulation);
    ContactProcess(const SimParams& p, const std::vector<Point>& initial, std::uint64_t replica,
                   StreamPurpose purpose);

    // Applies the next event. Throws ValidationError on an empty configuration.
    AppliedEvent step();
    // Applies the next event unless it falls after t_limit, in which case the
    // clock is set to t_limit and nothing happens.
    std::optional<AppliedEvent> advance(double t_limit);
    TrajectorySummary run_until(const StopRule& stop, const Sampling& sampling = {});

    double clock() const { return clock_; }
    std::size_t population() const { return particles_.size(); }
    std::size_t peak_population() const { return peak_; }
    const EventCounts& counts() const { return counts_; }
    const SimParams& params() const { return p_; }
    double total_rate() const;

    std::vector<Point> sites() const;
    std::size_t occupancy(const Point& x) const;
    // Ordered pairs at l1-distance ell, for ell = 1..ell_max.
    std::vector<std::uint64_t> pair_counts(int ell_max) const;

    const std::vector<ParticleRecord>& records() const { return records_; }
    // Site of a live particle by record index.
    std::optional<Point> site_of(std::uint32_t record) const;

    // Consistency of map, particle array and genealogy. For tests.
    bool check_invariants() const;

private:
    struct Particle {
        Point site;
        std::uint32_t record;
    };

    void add_particle(const Point& site, std::uint32_t record);
    void remove_particle(std::size_t i);
    void relocate(std::size_t i, const Point& to);
    AppliedEvent apply(double t);
    std::uint32_t new_record(std::vector<std::uint8_t> label, std::optional<std::uint32_t> parent,
                             double t);
    const std::vector<Point>& shell(int ell) const;

    SimParams p_;
    Stream rng_;
    double clock_ = 0;
    double death_, split_, exchange_, per_particle_;
    std::vector<Particle> particles_;
    absl::flat_hash_map<Point, std::uint32_t> occupant_;      // site -> particle (exclusive)
    absl::flat_hash_map<Point, std::uint32_t> multiplicity_;  // site -> count (no suppression)
    std::vector<ParticleRecord> records_;
    EventCounts counts_;
    std::size_t peak_ = 0;
    mutable std::map<int, std::vector<Point>> shells_;
};

struct MeanEstimate {
    double mean = 0;
    double std_error = 0;
};

struct Z1Estimate {
    std::map<int, MeanEstimate> by_ell;
    MeanEstimate split_both_alive;  // empirical P(F_1)
    double split_both_alive_formula = 0;
    std::size_t replicas = 0;
    double tau = 0;
};

// Monte Carlo E[Z_1^ell]: particle (1) splits before tau and before dying,
// both children are alive at tau and sit at l1-distance ell.
Z1Estimate estimate_z1(const SimParams& p, const std::vector<int>& ells, std::size_t replicas,
                       int workers);

// (N+theta)/(2N+theta) e^{-a tau} (1 - e^{-a tau}) with a = 2N + theta.
double split_both_alive_formula(const SimParams& p);

struct ZetaEstimate {
    MeanEstimate suppressed;  // suppressed newborns of particles alive at t
    MeanEstimate bound;       // sum_ell (p/h) 2(N+theta) int_window pairs_ell
    double window_start = 0;
    double window_end = 0;
    std::size_t replicas = 0;
};

ZetaEstimate count_zeta(const SimParams& p, double t_start, std::size_t replicas, int workers);

}  // namespace stircp
