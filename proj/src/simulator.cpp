#include "stircp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "stircp/errors.hpp"
#include "stircp/numerics.hpp"
#include "stircp/parallel.hpp"

namespace stircp {

std::string to_string(TimeScale s) { return s == TimeScale::original ? "original" : "speeded"; }

TimeScale parse_time_scale(const std::string& s) {
    if (s == "original") return TimeScale::original;
    if (s == "speeded") return TimeScale::speeded;
    throw ValidationError("time scale must be 'original' or 'speeded', got '" + s + "'");
}

void StopRule::validate() const {
    if (!t_max && !pop_cap) throw ValidationError("stop rule needs t_max or pop_cap");
    if (t_max && !(*t_max >= 0)) throw ValidationError("t_max must be >= 0");
    if (pop_cap && *pop_cap < 1) throw ValidationError("pop_cap must be >= 1");
}

double SimParams::death_rate() const {
    if (stirring_only) return 0.0;
    return scale == TimeScale::original ? 1.0 : static_cast<double>(N);
}

double SimParams::split_rate() const {
    if (stirring_only) return 0.0;
    return scale == TimeScale::original ? lambda() : N + theta;
}

double SimParams::exchange_rate() const {
    return scale == TimeScale::original ? static_cast<double>(N) : static_cast<double>(N) * N;
}

double SimParams::tau() const { return std::log(static_cast<double>(N)) / (static_cast<double>(N) * N); }

double SimParams::yule_rate() const { return 2.0 + theta / N + 2.0 * d * N; }

void SimParams::validate() const {
    check_dimension(d);
    if (kernel.dim() != d)
        throw ValidationError("kernel dimension " + std::to_string(kernel.dim()) +
                              " differs from d=" + std::to_string(d));
    if (N < 1) throw ValidationError("N must be a positive integer");
    if (!std::isfinite(theta)) throw ValidationError("theta must be finite");
    if (lambda() < 0) throw ValidationError("branching rate 1 + theta/N must be >= 0");
}

std::string to_string(EndKind k) {
    switch (k) {
        case EndKind::alive: return "alive";
        case EndKind::death: return "death";
        case EndKind::split: return "split";
        case EndKind::suppressed: return "suppressed";
    }
    return "?";
}

std::string to_string(EventKind k) {
    switch (k) {
        case EventKind::death: return "death";
        case EventKind::split: return "split";
        case EventKind::suppressed_birth: return "suppressed_birth";
        case EventKind::move: return "move";
        case EventKind::swap: return "swap";
        case EventKind::blocked: return "blocked";
    }
    return "?";
}

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::extinct: return "extinct";
        case Outcome::capped: return "capped";
        case Outcome::horizon: return "horizon";
    }
    return "?";
}

std::string label_string(const std::vector<std::uint8_t>& label) {
    std::string s = "(";
    for (std::size_t i = 0; i < label.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(label[i]);
    }
    return s + ")";
}

// ---------------------------------------------------------------------------

ContactProcess::ContactProcess(const SimParams& p, std::uint64_t replica, StreamPurpose purpose)
    : ContactProcess(p, std::vector<Point>{Point{}}, replica, purpose) {}

ContactProcess::ContactProcess(const SimParams& p, const std::vector<Point>& initial,
                               std::uint64_t replica, StreamPurpose purpose)
    : p_(p), rng_(p.seed, replica, purpose) {
    p_.validate();
    death_ = p_.death_rate();
    split_ = p_.split_rate();
    exchange_ = p_.exchange_rate();
    per_particle_ = death_ + split_ + 2 * p_.d * exchange_;
    for (std::size_t i = 0; i < initial.size(); ++i) {
        const Point& x = initial[i];
        if (p_.suppression && occupant_.contains(x))
            throw ValidationError("initial configuration has two particles at " +
                                  to_string(x, p_.d));
        std::uint32_t rec = 0;
        if (p_.genealogy) rec = new_record({static_cast<std::uint8_t>(i + 1)}, std::nullopt, 0.0);
        add_particle(x, rec);
    }
    peak_ = particles_.size();
}

std::uint32_t ContactProcess::new_record(std::vector<std::uint8_t> label,
                                         std::optional<std::uint32_t> parent, double t) {
    ParticleRecord r;
    r.label = std::move(label);
    r.parent = parent;
    r.birth_time = t;
    records_.push_back(std::move(r));
    return static_cast<std::uint32_t>(records_.size() - 1);
}

void ContactProcess::add_particle(const Point& site, std::uint32_t record) {
    auto idx = static_cast<std::uint32_t>(particles_.size());
    particles_.push_back({site, record});
    if (p_.suppression)
        occupant_[site] = idx;
    else
        ++multiplicity_[site];
}

void ContactProcess::remove_particle(std::size_t i) {
    const Point site = particles_[i].site;
    if (p_.suppression) {
        occupant_.erase(site);
    } else {
        auto it = multiplicity_.find(site);
        if (--it->second == 0) multiplicity_.erase(it);
    }
    std::size_t last = particles_.size() - 1;
    if (i != last) {
        particles_[i] = particles_[last];
        if (p_.suppression) occupant_[particles_[i].site] = static_cast<std::uint32_t>(i);
    }
    particles_.pop_back();
}

void ContactProcess::relocate(std::size_t i, const Point& to) {
    Point from = particles_[i].site;
    if (p_.suppression) {
        occupant_.erase(from);
        occupant_[to] = static_cast<std::uint32_t>(i);
    } else {
        auto it = multiplicity_.find(from);
        if (--it->second == 0) multiplicity_.erase(it);
        ++multiplicity_[to];
    }
    particles_[i].site = to;
}

double ContactProcess::total_rate() const {
    return static_cast<double>(particles_.size()) * per_particle_;
}

AppliedEvent ContactProcess::apply(double t) {
    clock_ = t;
    const std::size_t i = rng_.below(particles_.size());
    const double u = rng_.uniform() * per_particle_;
    AppliedEvent ev;
    ev.time = t;
    ev.from = particles_[i].site;
    ev.to = ev.from;

    if (u < death_) {
        ev.kind = EventKind::death;
        if (p_.genealogy) {
            auto& r = records_[particles_[i].record];
            r.end = EndKind::death;
            r.end_time = t;
        }
        remove_particle(i);
        ++counts_.deaths;
        return ev;
    }

    if (u < death_ + split_) {
        const Point target = ev.from + p_.kernel.sample(rng_);
        ev.to = target;
        const bool blocked = p_.suppression && occupant_.contains(target);
        ++counts_.splits;
        if (p_.genealogy) {
            const std::uint32_t parent = particles_[i].record;
            auto base = records_[parent].label;
            auto l0 = base, l1 = base;
            l0.push_back(0);
            l1.push_back(1);
            std::uint32_t c0 = new_record(std::move(l0), parent, t);
            std::uint32_t c1 = new_record(std::move(l1), parent, t);
            auto& r = records_[parent];
            r.end = EndKind::split;
            r.end_time = t;
            r.child0 = c0;
            r.child1 = c1;
            particles_[i].record = c0;
            if (blocked) {
                records_[c1].end = EndKind::suppressed;
                records_[c1].end_time = t;
            } else {
                add_particle(target, c1);
            }
        } else if (!blocked) {
            add_particle(target, 0);
        }
        if (blocked) {
            ++counts_.suppressed_births;
            ev.kind = EventKind::suppressed_birth;
        } else {
            ev.kind = EventKind::split;
            peak_ = std::max(peak_, particles_.size());
        }
        return ev;
    }

    const int dir = std::min(static_cast<int>((u - death_ - split_) / exchange_), 2 * p_.d - 1);
    const Point target = ev.from + direction(dir);
    ev.to = target;
    if (!p_.suppression) {
        relocate(i, target);
        ev.kind = EventKind::move;
        ++counts_.moves;
        return ev;
    }
    auto it = occupant_.find(target);
    if (it == occupant_.end()) {
        relocate(i, target);
        ev.kind = EventKind::move;
        ++counts_.moves;
        return ev;
    }
    // Occupied target. Swapping two particles leaves the configuration
    // unchanged, so it only matters when identities are tracked; the pair
    // swaps at total rate N (two proposers, each accepted with probability 1/2).
    if (p_.genealogy && (rng_.next_u32() & 1u)) {
        const std::uint32_t j = it->second;
        it->second = static_cast<std::uint32_t>(i);
        occupant_[ev.from] = j;
        particles_[j].site = ev.from;
        particles_[i].site = target;
        ev.kind = EventKind::swap;
        ++counts_.swaps;
        return ev;
    }
    ev.kind = EventKind::blocked;
    ++counts_.blocked;
    return ev;
}

AppliedEvent ContactProcess::step() {
    if (particles_.empty()) throw ValidationError("step on an empty configuration");
    double dt = rng_.exponential(total_rate());
    return apply(clock_ + dt);
}

std::optional<AppliedEvent> ContactProcess::advance(double t_limit) {
    if (particles_.empty()) {
        clock_ = std::max(clock_, t_limit);
        return std::nullopt;
    }
    double t = clock_ + rng_.exponential(total_rate());
    if (t > t_limit) {
        clock_ = std::max(clock_, t_limit);
        return std::nullopt;
    }
    return apply(t);
}

TrajectorySummary ContactProcess::run_until(const StopRule& stop, const Sampling& sampling) {
    stop.validate();
    if (!std::is_sorted(sampling.times.begin(), sampling.times.end()))
        throw ValidationError("sample times must be sorted");
    if (!sampling.times.empty() && sampling.times.front() < clock_)
        throw ValidationError("sample times must not precede the current clock");

    TrajectorySummary out;
    const std::size_t n_samples = sampling.times.size();
    out.population_at.assign(n_samples, 0.0);
    if (sampling.ell_max > 0)
        out.pairs_at.assign(n_samples, std::vector<std::uint64_t>(sampling.ell_max, 0));
    std::size_t k = 0;
    auto record = [&](std::size_t idx) {
        out.population_at[idx] = static_cast<double>(particles_.size());
        if (sampling.ell_max > 0) out.pairs_at[idx] = pair_counts(sampling.ell_max);
    };

    const double limit = stop.t_max ? *stop.t_max : std::numeric_limits<double>::infinity();
    while (true) {
        if (particles_.empty()) {
            out.outcome = Outcome::extinct;
            // Extinction is absorbing: the remaining samples are all zero.
            for (; k < n_samples; ++k) record(k);
            break;
        }
        if (stop.pop_cap && particles_.size() >= *stop.pop_cap) {
            out.outcome = Outcome::capped;
            break;
        }
        if (clock_ >= limit) {
            out.outcome = Outcome::horizon;
            for (; k < n_samples && sampling.times[k] <= limit; ++k) record(k);
            break;
        }
        const double t = clock_ + rng_.exponential(total_rate());
        for (; k < n_samples && sampling.times[k] < t && sampling.times[k] <= limit; ++k) record(k);
        if (t > limit) {
            clock_ = limit;
            continue;  // horizon branch above
        }
        apply(t);
    }
    out.observed = k;
    out.final_time = clock_;
    out.final_population = particles_.size();
    out.peak_population = peak_;
    out.counts = counts_;
    return out;
}

std::vector<Point> ContactProcess::sites() const {
    std::vector<Point> s;
    s.reserve(particles_.size());
    for (const auto& q : particles_) s.push_back(q.site);
    return s;
}

std::size_t ContactProcess::occupancy(const Point& x) const {
    if (p_.suppression) return occupant_.contains(x) ? 1 : 0;
    auto it = multiplicity_.find(x);
    return it == multiplicity_.end() ? 0 : it->second;
}

const std::vector<Point>& ContactProcess::shell(int ell) const {
    auto it = shells_.find(ell);
    if (it == shells_.end()) it = shells_.emplace(ell, shell_points(p_.d, ell).points).first;
    return it->second;
}

std::vector<std::uint64_t> ContactProcess::pair_counts(int ell_max) const {
    if (ell_max < 1) throw ValidationError("ell_max must be >= 1");
    std::vector<std::uint64_t> out(static_cast<std::size_t>(ell_max), 0);
    const std::size_t n = particles_.size();
    if (n < 2) return out;
    std::uint64_t shell_work = 0;
    for (int ell = 1; ell <= ell_max; ++ell) shell_work += shell_size(p_.d, ell);
    if (static_cast<double>(n) < static_cast<double>(shell_work)) {
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) {
                auto dist = l1_norm(particles_[a].site - particles_[b].site);
                if (dist >= 1 && dist <= ell_max) out[static_cast<std::size_t>(dist - 1)] += 2;
            }
        return out;
    }
    for (const auto& q : particles_)
        for (int ell = 1; ell <= ell_max; ++ell)
            for (const Point& z : shell(ell)) out[ell - 1] += occupancy(q.site + z);
    return out;
}

std::optional<Point> ContactProcess::site_of(std::uint32_t record) const {
    if (!p_.genealogy) return std::nullopt;
    for (const auto& q : particles_)
        if (q.record == record) return q.site;
    return std::nullopt;
}

bool ContactProcess::check_invariants() const {
    if (p_.suppression) {
        if (occupant_.size() != particles_.size()) return false;
        for (std::size_t i = 0; i < particles_.size(); ++i) {
            auto it = occupant_.find(particles_[i].site);
            if (it == occupant_.end() || it->second != i) return false;
        }
    } else {
        std::size_t total = 0;
        for (auto& [site, c] : multiplicity_) total += c;
        if (total != particles_.size()) return false;
    }
    if (p_.genealogy) {
        std::unordered_set<std::uint32_t> live;
        for (const auto& q : particles_) live.insert(q.record);
        if (live.size() != particles_.size()) return false;
        for (std::uint32_t r = 0; r < records_.size(); ++r) {
            bool alive = records_[r].end == EndKind::alive;
            if (alive != (live.count(r) > 0)) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------

namespace {

SimParams speeded_with_genealogy(const SimParams& p, const char* what) {
    if (!p.genealogy) throw ValidationError(std::string(what) + " needs genealogy on");
    if (p.scale != TimeScale::speeded)
        throw ValidationError(std::string(what) + " needs the speeded time scale");
    p.validate();
    return p;
}

MeanEstimate summarize(const RunningStats& s) { return {s.mean(), s.stderr_of_mean()}; }

}  // namespace

double split_both_alive_formula(const SimParams& p) {
    const double a = 2.0 * p.N + p.theta;
    const double e = std::exp(-a * p.tau());
    return (p.N + p.theta) / a * e * (1 - e);
}

Z1Estimate estimate_z1(const SimParams& params, const std::vector<int>& ells,
                       std::size_t replicas, int workers) {
    const SimParams p = speeded_with_genealogy(params, "estimate_z1");
    if (replicas == 0) throw ValidationError("replicas must be >= 1");
    for (int ell : ells)
        if (ell < 1) throw ValidationError("shell radius must be >= 1");
    const double tau = p.tau();

    // Per replica: -1 if F_1 fails, else the children's l1 distance.
    auto dist = run_replicas<std::int64_t>(replicas, workers, [&](std::size_t i) -> std::int64_t {
        ContactProcess proc(p, i, StreamPurpose::split_event);
        proc.run_until(StopRule{tau, std::nullopt});
        const auto& root = proc.records()[0];
        if (root.end != EndKind::split) return -1;
        const auto& r = proc.records();
        if (r[*root.child0].end != EndKind::alive || r[*root.child1].end != EndKind::alive)
            return -1;
        auto a = proc.site_of(*root.child0);
        auto b = proc.site_of(*root.child1);
        return l1_norm(*a - *b);
    });

    Z1Estimate out;
    out.replicas = replicas;
    out.tau = tau;
    out.split_both_alive_formula = split_both_alive_formula(p);
    RunningStats f1;
    std::map<int, RunningStats> z;
    for (std::int64_t v : dist) {
        f1.add(v >= 0 ? 1.0 : 0.0);
        for (int ell : ells) z[ell].add(v == ell ? 1.0 : 0.0);
    }
    out.split_both_alive = summarize(f1);
    for (int ell : ells) out.by_ell[ell] = summarize(z[ell]);
    return out;
}

ZetaEstimate count_zeta(const SimParams& params, double t_start, std::size_t replicas,
                        int workers) {
    const SimParams p = speeded_with_genealogy(params, "count_zeta");
    if (replicas == 0) throw ValidationError("replicas must be >= 1");
    if (!(t_start >= 0)) throw ValidationError("window start must be >= 0");
    const double t_end = t_start + p.tau();
    const int ell_max = p.kernel.max_radius();
    std::vector<double> weight(static_cast<std::size_t>(ell_max), 0.0);
    for (int ell = 1; ell <= ell_max; ++ell)
        weight[ell - 1] = p.kernel.weight(ell) / static_cast<double>(shell_size(p.d, ell)) *
                          2.0 * (p.N + p.theta);

    struct Tally {
        double suppressed = 0;
        double bound = 0;
    };
    auto tallies = run_replicas<Tally>(replicas, workers, [&](std::size_t i) {
        ContactProcess proc(p, i, StreamPurpose::zeta_count);
        proc.run_until(StopRule{t_start, std::nullopt});
        std::vector<std::uint32_t> alive;
        for (std::uint32_t r = 0; r < proc.records().size(); ++r)
            if (proc.records()[r].end == EndKind::alive) alive.push_back(r);

        Tally t;
        KahanSum integral;
        auto rate = [&] {
            if (proc.population() < 2) return 0.0;
            auto pc = proc.pair_counts(ell_max);
            double w = 0;
            for (int ell = 1; ell <= ell_max; ++ell) w += weight[ell - 1] * pc[ell - 1];
            return w;
        };
        double prev = proc.clock();
        double w = rate();
        while (true) {
            auto ev = proc.advance(t_end);
            double until = ev ? ev->time : t_end;
            integral.add(w * (until - prev));
            prev = until;
            if (!ev) break;
            w = rate();
        }
        t.bound = integral.value();
        for (std::uint32_t a : alive) {
            const auto& r = proc.records()[a];
            if (r.end == EndKind::split && r.end_time <= t_end &&
                proc.records()[*r.child1].end == EndKind::suppressed)
                t.suppressed += 1;
        }
        return t;
    });

    RunningStats s, b;
    for (const auto& t : tallies) {
        s.add(t.suppressed);
        b.add(t.bound);
    }
    return {summarize(s), summarize(b), t_start, t_end, replicas};
}

}  // namespace stircp
