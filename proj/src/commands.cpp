#include "stircp/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <set>

#include "stircp/errors.hpp"
#include "stircp/estimators.hpp"
#include "stircp/green.hpp"
#include "stircp/parallel.hpp"
#include "stircp/walks.hpp"

namespace stircp {

namespace {

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json stats_json(double mean, double se) { return Json{{"mean", mean}, {"stderr", se}}; }

Point point_option(const RunSpec& s, const std::string& key, const Point& fallback) {
    if (!s.has(key)) return fallback;
    auto v = s.opt<std::vector<int>>(key);
    if (static_cast<int>(v.size()) != s.d)
        throw ValidationError("options." + key + " needs " + std::to_string(s.d) + " coordinates");
    Point p;
    for (int i = 0; i < s.d; ++i) p[i] = v[i];
    return p;
}

Point unit(int i) {
    Point p;
    p[i] = 1;
    return p;
}

Json counts_json(const EventCounts& c) {
    return Json{{"deaths", c.deaths},       {"splits", c.splits},
                {"suppressed_births", c.suppressed_births},
                {"moves", c.moves},         {"swaps", c.swaps},
                {"blocked", c.blocked}};
}

Json summary_json(const TrajectorySummary& s) {
    return Json{{"outcome", to_string(s.outcome)},
                {"final_time", s.final_time},
                {"final_population", s.final_population},
                {"peak_population", s.peak_population},
                {"counts", counts_json(s.counts)}};
}

Json stop_json(const StopRule& s) {
    Json j = Json::object();
    if (s.t_max) j["t_max"] = *s.t_max;
    if (s.pop_cap) j["pop_cap"] = *s.pop_cap;
    return j;
}

Json theta_json(const ThetaResult& r) {
    return Json{{"value", r.value},   {"tol", r.tol},       {"method", to_string(r.method)},
                {"n_max", r.n_max},   {"error_bound", r.error_bound}};
}

Json green_json(const GreenValue& g) {
    return Json{{"value", g.value},
                {"tol", g.tol},
                {"method", g.method},
                {"n_max", g.n_max},
                {"error_bound", g.error_bound}};
}

CommandResult run_simulate(const RunSpec& s, int workers) {
    const SimParams p = s.sim_params();
    p.validate();
    s.stop.validate();
    auto runs = run_replicas<TrajectorySummary>(s.replicas, workers, [&](std::size_t i) {
        ContactProcess c(p, i);
        return c.run_until(s.stop);
    });
    CommandResult out;
    RunningStats pop, peak, time;
    EventCounts total;
    std::map<std::string, std::size_t> outcomes{{"extinct", 0}, {"capped", 0}, {"horizon", 0}};
    std::size_t survived = 0;
    Table t{{"replica", "outcome", "final_time", "final_population", "peak_population"}, {}};
    const bool per_replica = !s.has("per_replica") || s.opt<bool>("per_replica");
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& r = runs[i];
        pop.add(static_cast<double>(r.final_population));
        peak.add(static_cast<double>(r.peak_population));
        time.add(r.final_time);
        outcomes[to_string(r.outcome)]++;
        survived += r.outcome == Outcome::capped ||
                    (r.outcome == Outcome::horizon && r.final_population > 0);
        total.deaths += r.counts.deaths;
        total.splits += r.counts.splits;
        total.suppressed_births += r.counts.suppressed_births;
        total.moves += r.counts.moves;
        total.swaps += r.counts.swaps;
        total.blocked += r.counts.blocked;
        t.rows.push_back({i, to_string(r.outcome), r.final_time, r.final_population,
                          r.peak_population});
        if (per_replica) {
            Json j = summary_json(r);
            j["replica"] = i;
            out.per_replica.push_back(std::move(j));
        }
    }
    auto ci = wilson_interval(survived, runs.size());
    out.result = Json{{"replicas", runs.size()},
                      {"outcomes", outcomes},
                      {"survival_frequency", static_cast<double>(survived) / runs.size()},
                      {"survival_ci", {ci.lo, ci.hi}},
                      {"final_population", stats_json(pop.mean(), pop.stderr_of_mean())},
                      {"peak_population", stats_json(peak.mean(), peak.stderr_of_mean())},
                      {"final_time", stats_json(time.mean(), time.stderr_of_mean())},
                      {"event_totals", counts_json(total)},
                      {"derived",
                       {{"lambda", p.lambda()}, {"tau", p.tau()}, {"yule_rate", p.yule_rate()}}}};
    out.detail = std::move(t);
    return out;
}

CommandResult run_survival(const RunSpec& s, int workers) {
    auto e = survival_prob(s.sim_params(), s.stop, s.replicas, workers);
    CommandResult out;
    out.result = Json{{"rho_hat", e.rho_hat},
                      {"ci", {e.ci.lo, e.ci.hi}},
                      {"replicas", e.replicas},
                      {"survived", e.survived},
                      {"proxy", stop_json(e.proxy)},
                      {"censoring",
                       {{"extinct", e.censoring.extinct},
                        {"capped", e.censoring.capped},
                        {"horizon_alive", e.censoring.horizon_alive}}}};
    out.detail = Table{{"outcome", "count"},
                       {{"extinct", e.censoring.extinct},
                        {"capped", e.censoring.capped},
                        {"horizon_alive", e.censoring.horizon_alive}}};
    return out;
}

CommandResult run_lambda_c(const RunSpec& s, int workers) {
    LambdaCOptions o;
    o.replicas = s.replicas;
    o.workers = workers;
    if (s.has("threshold")) o.threshold = s.opt<double>("threshold");
    if (s.has("threshold_times_N")) o.threshold_times_N = s.opt<double>("threshold_times_N");
    if (s.has("lambda_lo")) o.lambda_lo = s.opt<double>("lambda_lo");
    if (s.has("lambda_hi")) o.lambda_hi = s.opt<double>("lambda_hi");
    if (s.has("resolution")) o.resolution = s.opt<double>("resolution");
    if (s.has("max_probes")) o.max_probes = s.opt<int>("max_probes");
    auto e = lambda_c_estimate(s.sim_params(), s.stop, o);
    CommandResult out;
    Table t{{"lambda", "theta", "frequency", "survived", "replicas"}, {}};
    Json probes = Json::array();
    for (const auto& pr : e.probes) {
        probes.push_back({{"lambda", pr.lambda}, {"frequency", pr.frequency},
                          {"survived", pr.survived}});
        t.rows.push_back({pr.lambda, s.N * (pr.lambda - 1), pr.frequency, pr.survived,
                          pr.replicas});
    }
    out.result = Json{{"d", e.d},
                      {"N", e.N},
                      {"lambda_hat", e.lambda_hat},
                      {"bracket", {e.lambda_lo, e.lambda_hi}},
                      {"threshold", e.threshold},
                      {"scaled", e.scaled},
                      {"scaled_stderr", number_or_null(e.scaled_stderr)},
                      {"converged", e.converged},
                      {"proxy", stop_json(s.stop)},
                      {"probes", probes}};
    out.detail = std::move(t);
    return out;
}

CommandResult run_curves(const RunSpec& s, int workers) {
    auto grid = s.opt<std::vector<double>>("t_grid");
    int ell_max = s.has("ell_max") ? s.opt<int>("ell_max") : s.kernel.max_radius();
    auto c = estimate_curves(s.sim_params(), grid, ell_max, s.replicas, workers);
    CommandResult out;
    Table t{{"quantity", "t", "mean", "stderr", "replicas"}, {}};
    Json q = Json::object();
    auto add = [&](const CurveEstimate& e) {
        q[e.quantity] = {{"times", e.times}, {"means", e.means}, {"stderrs", e.stderrs}};
        for (std::size_t k = 0; k < e.times.size(); ++k)
            t.rows.push_back({e.quantity, e.times[k], e.means[k], e.stderrs[k], e.replicas});
    };
    add(c.m_hat);
    for (auto& [ell, e] : c.I_hat) add(e);
    out.result = Json{{"replicas", s.replicas}, {"curves", q}};
    out.detail = std::move(t);
    return out;
}

CommandResult run_green(const RunSpec& s, int) {
    const Point x = point_option(s, "x", Point{});
    const Point y = point_option(s, "y", Point{});
    const auto method = s.opt<std::string>("method");
    CommandResult out;
    if (method == "dp") {
        out.result = green_json(green(s.d, x, y, s.tol));
    } else if (method == "integral") {
        out.result = green_json(green_integral(s.d, x, y, s.tol));
    } else if (method == "both") {
        auto a = green(s.d, x, y, s.tol);
        auto b = green_integral(s.d, x, y, s.tol);
        const double diff = std::abs(a.value - b.value);
        out.result = Json{{"value", a.value},
                          {"tol", s.tol},
                          {"method", "both"},
                          {"n_max", a.n_max},
                          {"dp", green_json(a)},
                          {"integral", green_json(b)},
                          {"difference", diff},
                          {"agree", diff <= a.tol + b.tol}};
    } else {
        throw ValidationError("method must be dp, integral or both");
    }
    out.result["x"] = to_string(x, s.d);
    out.result["y"] = to_string(y, s.d);
    return out;
}

CommandResult run_theta(const RunSpec& s, int) {
    const auto method = s.opt<std::string>("method");
    CommandResult out;
    if (method == "kernel-green") {
        out.result = theta_json(theta(s.kernel, s.tol));
    } else if (method == "walk-sum") {
        out.result = theta_json(theta_via_walk_sum(s.kernel, s.tol));
    } else if (method == "both") {
        auto a = theta(s.kernel, s.tol);
        auto b = theta_via_walk_sum(s.kernel, s.tol);
        const double diff = std::abs(a.value - b.value);
        out.result = Json{{"value", a.value},
                          {"tol", s.tol},
                          {"method", "both"},
                          {"n_max", b.n_max},
                          {"kernel-green", theta_json(a)},
                          {"walk-sum", theta_json(b)},
                          {"difference", diff},
                          {"agree", diff <= a.tol + b.tol}};
    } else {
        throw ValidationError("method must be kernel-green, walk-sum or both");
    }
    out.result["kernel"] = s.kernel.describe();
    return out;
}

CommandResult run_ztable(const RunSpec& s, int workers) {
    auto Ns = s.opt<std::vector<double>>("N_list");
    const double th = s.effective_theta();
    auto t = theta_limit_table(s.kernel, Ns, s.tol, th);
    const bool mc = s.has("mc") && s.opt<bool>("mc");
    CommandResult out;
    Table tab{{"N", "estimate", "exact_split_law", "bound", "theta_ref", "relative_gap"}, {}};
    if (mc) {
        tab.columns.push_back("mc_estimate");
        tab.columns.push_back("mc_stderr");
    }
    Json rows = Json::array();
    for (const auto& r : t.rows) {
        Json j{{"N", r.N},
               {"estimate", r.estimate},
               {"exact_split_law", r.exact_split_law},
               {"bound", r.bound},
               {"theta_ref", r.theta_ref},
               {"relative_gap", r.relative_gap}};
        std::vector<Json> cells{r.N, r.estimate, r.exact_split_law, r.bound, r.theta_ref,
                                r.relative_gap};
        if (mc) {
            double est = 0, se = 0;
            for (int ell : s.kernel.support()) {
                double w = 2 * r.N * s.kernel.weight(ell) /
                           static_cast<double>(shell_size(s.d, ell));
                auto z = z1_monte_carlo(r.N, th, s.kernel, ell, s.replicas, s.seed, workers);
                est += w * z.mean;
                se += w * z.std_error;
            }
            j["mc_estimate"] = est;
            j["mc_stderr"] = se;
            cells.push_back(est);
            cells.push_back(se);
        }
        rows.push_back(j);
        tab.rows.push_back(cells);
    }
    tab.rows.push_back({"inf", t.limit.estimate, t.limit.exact_split_law, t.limit.bound,
                        t.limit.theta_ref, t.limit.relative_gap});
    if (mc) tab.rows.back().insert(tab.rows.back().end(), {"", ""});
    out.result = Json{{"d", t.d},
                      {"kernel", s.kernel.describe()},
                      {"theta", th},
                      {"tol", s.tol},
                      {"rows", rows},
                      {"limit",
                       {{"estimate", t.limit.estimate}, {"theta_ref", t.limit.theta_ref},
                        {"relative_gap", t.limit.relative_gap}}},
                      {"bound_holds", t.bound_holds},
                      {"monotone_tail", t.monotone_tail}};
    out.detail = std::move(tab);
    return out;
}

CommandResult run_verify_atlas(const RunSpec& s, int) {
    CommandResult out;
    Json per = Json::array();
    Table t{{"d", "phi", "second_shell", "J1", "J2", "ok"}, {}};
    for (int d : s.opt<std::vector<int>>("d_list")) {
        auto a = build_atlas(d);
        auto c = verify_atlas(a);
        per.push_back({{"d", d},
                       {"phi", a.phi.size()},
                       {"second_shell", a.second.size()},
                       {"J1", a.J1.size()},
                       {"J2", a.J2.size()},
                       {"ok", c.ok},
                       {"failures", c.failures}});
        t.rows.push_back({d, a.phi.size(), a.second.size(), a.J1.size(), a.J2.size(), c.ok});
        out.check_failed |= !c.ok;
    }
    out.result = Json{{"dimensions", per}, {"pass", !out.check_failed}};
    out.detail = std::move(t);
    return out;
}

CommandResult run_verify_exit(const RunSpec& s, int workers) {
    const Point start = point_option(s, "start", unit(0));
    const auto walk = s.opt<std::string>("walk");
    const auto cap = s.has("step_cap") ? s.opt<std::uint64_t>("step_cap") : kExitStepCap;
    const double expect = 1.0 / (2 * s.d - 1);
    std::vector<WalkType> types;
    if (walk == "both") types = {WalkType::V, WalkType::W};
    else types = {parse_walk_type(walk)};
    CommandResult out;
    Json per = Json::object();
    Table t{{"walk", "p_J1", "p_J2", "stderr", "expected", "censored", "replicas"}, {}};
    std::map<WalkType, ExitDistribution> got;
    for (auto type : types) {
        // W draws from the next seed so the two walks are independent.
        auto e = exit_distribution(type, s.d, start, s.replicas,
                                   s.seed + (type == WalkType::W ? 1 : 0), workers, cap);
        got[type] = e;
        const bool ok = std::abs(e.p_J1 - expect) <= 3 * e.std_error && e.censored == 0;
        per[to_string(type)] = {{"p_J1", e.p_J1},         {"p_J2", e.p_J2},
                                {"stderr", e.std_error},  {"censored", e.censored},
                                {"replicas", e.replicas}, {"within_3sigma", ok}};
        t.rows.push_back({to_string(type), e.p_J1, e.p_J2, e.std_error, expect, e.censored,
                          e.replicas});
        out.check_failed |= !ok;
    }
    out.result = Json{{"d", s.d}, {"start", to_string(start, s.d)}, {"expected_J1", expect},
                      {"walks", per}};
    if (got.size() == 2) {
        const auto& v = got[WalkType::V];
        const auto& w = got[WalkType::W];
        const double comb = std::hypot(v.std_error, w.std_error);
        const bool agree = std::abs(v.p_J1 - w.p_J1) <= 3 * comb;
        out.result["V_minus_W"] = {{"difference", v.p_J1 - w.p_J1}, {"combined_stderr", comb},
                                   {"within_3sigma", agree}};
        out.check_failed |= !agree;
    }
    out.result["pass"] = !out.check_failed;
    out.detail = std::move(t);
    return out;
}

CommandResult run_verify_occupation(const RunSpec& s, int workers) {
    const Point start = point_option(s, "start", unit(0));
    CommandResult out;
    Json rows = Json::array();
    Table t{{"ell", "t", "V", "V_stderr", "W", "W_stderr", "poissonized", "poissonized_stderr",
             "z_VW", "z_VP"},
            {}};
    for (int ell : s.opt<std::vector<int>>("ells")) {
        for (double h : s.opt<std::vector<double>>("horizons")) {
            auto v = occupation_time(WalkType::V, s.d, s.N, ell, h, start, s.replicas, s.seed, workers);
            auto w = occupation_time(WalkType::W, s.d, s.N, ell, h, start, s.replicas, s.seed + 1,
                                     workers);
            auto p = poissonized_occupation(s.d, s.N, ell, h, start, s.replicas, s.seed + 2, workers);
            auto z = [](const OccupationEstimate& a, const OccupationEstimate& b) {
                double c = std::hypot(a.std_error, b.std_error);
                return c > 0 ? (a.mean - b.mean) / c : 0.0;
            };
            const double z_vw = z(v, w), z_vp = z(v, p);
            const bool ok = std::abs(z_vw) <= 3 && std::abs(z_vp) <= 3;
            out.check_failed |= !ok;
            rows.push_back({{"ell", ell},
                            {"t", h},
                            {"V", stats_json(v.mean, v.std_error)},
                            {"W", stats_json(w.mean, w.std_error)},
                            {"poissonized", stats_json(p.mean, p.std_error)},
                            {"z_VW", z_vw},
                            {"z_VP", z_vp},
                            {"within_3sigma", ok}});
            t.rows.push_back({ell, h, v.mean, v.std_error, w.mean, w.std_error, p.mean,
                              p.std_error, z_vw, z_vp});
        }
    }
    out.result = Json{{"d", s.d}, {"N", s.N}, {"start", to_string(start, s.d)}, {"rows", rows},
                      {"pass", !out.check_failed}};
    out.detail = std::move(t);
    return out;
}

CommandResult run_verify_z1(const RunSpec& s, int workers) {
    SimParams p = s.sim_params();
    p.genealogy = true;
    auto ells = s.opt<std::vector<int>>("ells");
    auto mc = estimate_z1(p, ells, s.replicas, workers);
    CommandResult out;
    Json rows = Json::array();
    Table t{{"ell", "mc", "mc_stderr", "semianalytic", "exact_split_law", "z"}, {}};
    for (int ell : ells) {
        auto z = z1_semianalytic(s.d, s.N, p.theta, s.kernel, ell, 1e-12);
        const auto& m = mc.by_ell.at(ell);
        const double score = m.std_error > 0 ? (m.mean - z.value) / m.std_error
                                             : (m.mean == z.value ? 0.0 : INFINITY);
        const bool ok = std::abs(score) <= 3;
        out.check_failed |= !ok;
        rows.push_back({{"ell", ell},
                        {"mc", stats_json(m.mean, m.std_error)},
                        {"semianalytic", z.value},
                        {"exact_split_law", z.exact_split_law},
                        {"z", number_or_null(score)},
                        {"within_3sigma", ok}});
        t.rows.push_back({ell, m.mean, m.std_error, z.value, z.exact_split_law, score});
    }
    out.result = Json{{"d", s.d},
                      {"N", s.N},
                      {"tau", mc.tau},
                      {"rows", rows},
                      {"split_both_alive",
                       {{"mc", stats_json(mc.split_both_alive.mean, mc.split_both_alive.std_error)},
                        {"formula", mc.split_both_alive_formula}}},
                      {"pass", !out.check_failed}};
    out.detail = std::move(t);
    return out;
}

CommandResult run_moment(const RunSpec& s, int workers) {
    auto grid = s.opt<std::vector<double>>("t_grid");
    const int ell_max = s.has("ell_max") ? s.opt<int>("ell_max") : s.kernel.max_radius();
    const bool growth = s.has("growth_only") && s.opt<bool>("growth_only");
    auto r = check_moment_identity(s.sim_params(), grid, ell_max, s.replicas, workers, growth);
    CommandResult out;
    Table t{{"t", "residual", "sigma", "z", "quadrature_error"}, {}};
    for (const auto& row : r.rows)
        t.rows.push_back({row.t, row.residual, row.sigma, row.z, row.quadrature_error});
    out.result = Json{{"replicas", r.replicas},
                      {"growth_only", r.growth_only},
                      {"max_abs_z", r.max_abs_z},
                      {"within_3sigma", r.within_3sigma},
                      {"warnings", r.warnings},
                      {"pass", r.within_3sigma}};
    out.check_failed = !r.within_3sigma;
    out.detail = std::move(t);
    return out;
}

CommandResult run_decay(const RunSpec& s, int workers) {
    auto grid = s.opt<std::vector<double>>("t_grid");
    const int floor = s.has("n_floor") ? s.opt<int>("n_floor") : 10;
    std::optional<double> vt;
    if (s.has("vartheta")) vt = s.opt<double>("vartheta");
    auto r = check_decay_bound(s.sim_params(), grid, s.replicas, workers, floor, vt);
    CommandResult out;
    Table t{{"t", "m_hat", "stderr", "bound_envelope", "margin", "violated"}, {}};
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        t.rows.push_back({row.t, row.m_hat, row.std_error, row.envelope, row.margin, row.violated});
        rows.push_back({{"t", row.t},
                        {"m_hat", row.m_hat},
                        {"stderr", row.std_error},
                        {"bound_envelope", row.envelope}});
    }
    out.result = Json{{"vartheta", r.vartheta},
                      {"theta", s.effective_theta()},
                      {"N", s.N},
                      {"violations", r.violations},
                      {"below_floor", r.below_floor},
                      {"decreasing_trend", r.decreasing_trend},
                      {"replicas", r.replicas},
                      {"rows", rows},
                      {"note", r.note}};
    out.detail = std::move(t);
    return out;
}

CommandResult run_shell(const RunSpec& s, int) {
    const int ell = s.opt<int>("ell");
    CommandResult out;
    out.result = Json{{"d", s.d}, {"ell", ell}, {"size", shell_size(s.d, ell)}};
    if (s.has("list_points") && s.opt<bool>("list_points")) {
        Json pts = Json::array();
        Table t{{"point"}, {}};
        for (const Point& p : shell_points(s.d, ell).points) {
            pts.push_back(to_string(p, s.d));
            t.rows.push_back({to_string(p, s.d)});
        }
        out.result["points"] = pts;
        out.detail = std::move(t);
    }
    return out;
}

CommandResult run_report(const RunSpec& s, int) {
    CommandResult out;
    if (s.has("input")) {
        auto recs = read_jsonl(s.opt<std::string>("input"));
        std::map<std::string, std::size_t> by_kind, by_command;
        for (const auto& r : recs) {
            by_kind[r["kind"].get<std::string>()]++;
            by_command[r["run_spec"]["command"].get<std::string>()]++;
        }
        out.result = Json{{"input", s.opt<std::string>("input")},
                          {"records", recs.size()},
                          {"valid", true},
                          {"by_kind", by_kind},
                          {"by_command", by_command}};
        return out;
    }
    std::vector<int> Ns;
    for (double n : s.opt<std::vector<double>>("N_list")) Ns.push_back(static_cast<int>(n));
    auto rep = asymptotics_report(s.kernel, Ns, s.tol);
    Table t{{"N", "phi", "lower_constant", "upper_constant", "theta", "lambda_pred",
             "lambda_lower", "lambda_upper"},
            {}};
    Json rows = Json::array();
    for (const auto& r : rep.rows) {
        t.rows.push_back({r.N, r.phi, r.lower_constant, r.upper_constant, r.theta, r.lambda_pred,
                          r.lambda_lower, r.lambda_upper});
        rows.push_back({{"N", r.N},
                        {"phi", r.phi},
                        {"lower_constant", r.lower_constant},
                        {"upper_constant", r.upper_constant},
                        {"theta", r.theta},
                        {"lambda_pred", r.lambda_pred}});
    }
    out.result = Json{{"d", rep.d},
                      {"kernel", rep.kernel.describe()},
                      {"green_origin", rep.green_origin},
                      {"rows", rows},
                      {"low_dim_notes", rep.low_dim_notes}};
    out.detail = std::move(t);
    return out;
}

CommandResult run_plotdata(const RunSpec& s, int) {
    for (const char* key : {"input", "kind", "out_dir"})
        if (!s.has(key)) throw ValidationError(std::string("plotdata needs options.") + key);
    CommandResult out;
    out.result = emit_plotdata(read_jsonl(s.opt<std::string>("input")), s.opt<std::string>("kind"),
                               s.opt<std::string>("out_dir"));
    return out;
}

using Runner = std::function<CommandResult(const RunSpec&, int)>;

const std::map<std::string, Runner>& runners() {
    static const std::map<std::string, Runner> r = {
        {"simulate", run_simulate},
        {"survival", run_survival},
        {"lambda-c", run_lambda_c},
        {"curves", run_curves},
        {"green", run_green},
        {"theta", run_theta},
        {"ztable", run_ztable},
        {"verify lemma-A", run_verify_atlas},
        {"verify exit", run_verify_exit},
        {"verify occupation", run_verify_occupation},
        {"verify z1", run_verify_z1},
        {"check moment-identity", run_moment},
        {"check decay-bound", run_decay},
        {"shell", run_shell},
        {"report", run_report},
        {"plotdata", run_plotdata},
        {"sweep", [](const RunSpec& s, int w) {
             CommandResult out;
             out.result = run_sweep(s, w);
             return out;
         }},
    };
    return r;
}

// Result records of one command, whether run directly or as sweep points.
std::vector<std::pair<Json, Json>> results_of(const std::vector<Json>& records,
                                              const std::string& command) {
    std::vector<std::pair<Json, Json>> out;
    for (const auto& r : records) {
        if (r["run_spec"]["command"] != command) continue;
        if (r["kind"] == "aggregate") out.emplace_back(r["run_spec"], r["result"]);
        if (r["kind"] == "sweep-point" && r["result"]["status"] == "ok")
            out.emplace_back(r["run_spec"], r["result"]["result"]);
    }
    return out;
}

}  // namespace

CommandResult run_command(const RunSpec& spec, int workers) {
    auto it = runners().find(spec.command);
    if (it == runners().end()) throw ValidationError("unknown command '" + spec.command + "'");
    return it->second(spec, workers);
}

Json run_sweep(const RunSpec& spec, int workers) {
    if (!spec.out) throw ValidationError("sweep needs an output file (--out)");
    if (!spec.has("target")) throw ValidationError("sweep needs options.target");
    if (!spec.has("grid")) throw ValidationError("sweep needs options.grid");
    const auto target = spec.opt<std::string>("target");
    if (target == "sweep" || target == "plotdata" || target == "report")
        throw ValidationError("sweep target '" + target + "' is not a computation");
    if (!runners().count(target)) throw ValidationError("unknown sweep target '" + target + "'");

    Json grid = spec.options["grid"];
    std::vector<std::string> keys;
    for (auto it = grid.begin(); it != grid.end(); ++it) {
        static const std::set<std::string> allowed = {"N", "theta", "kernel", "replicas"};
        if (!allowed.count(it.key()))
            throw ValidationError("grid key '" + it.key() + "' is not one of N, theta, kernel, replicas");
        if (!it.value().is_array() || it.value().empty())
            throw ValidationError("grid." + it.key() + " must be a non-empty array");
        keys.push_back(it.key());
    }

    // Points inherit the sweep's params, seed, replicas, stop and tol; options
    // are the target's defaults overlaid with target_options.
    Json base = to_json(spec);
    base["command"] = target;
    base.erase("outputs");
    base["options"] = command_defaults(target)["options"];
    if (spec.has("target_options")) base["options"].merge_patch(spec.options["target_options"]);

    std::vector<Json> done;
    if (std::filesystem::exists(*spec.out)) {
        for (const auto& r : read_jsonl(*spec.out))
            if (r["kind"] == "sweep-point" && r["result"]["status"] == "ok")
                done.push_back(r["result"]["grid_point"]);
    }

    std::size_t total = 1;
    for (auto& k : keys) total *= grid[k].size();
    std::size_t ran = 0, skipped = 0, failed = 0;
    for (std::size_t idx = 0; idx < total; ++idx) {
        Json point = Json::object();
        std::size_t rem = idx;
        std::vector<std::pair<std::string, Json>> picks;
        for (auto k = keys.rbegin(); k != keys.rend(); ++k) {
            const auto& vals = grid[*k];
            picks.emplace_back(*k, vals[rem % vals.size()]);
            rem /= vals.size();
        }
        for (auto p = picks.rbegin(); p != picks.rend(); ++p) point[p->first] = p->second;
        if (std::find(done.begin(), done.end(), point) != done.end()) {
            ++skipped;
            continue;
        }

        const std::string started = utc_timestamp();
        Json record;
        try {
            Json j = base;
            for (auto it = point.begin(); it != point.end(); ++it) {
                if (it.key() == "N") {
                    j["params"]["N"] = it.value();
                    if (target == "ztable") j["options"]["N_list"] = Json::array({it.value()});
                } else if (it.key() == "theta") {
                    j["params"].erase("lambda");
                    j["params"]["theta"] = it.value();
                } else if (it.key() == "kernel") {
                    j["params"]["kernel"] = it.value().is_string()
                                                ? kernel_to_json(load_kernel_file(it.value()))
                                                : it.value();
                } else {
                    j["replicas"] = it.value();
                }
            }
            RunSpec inner = run_spec_from_json(j);
            auto res = run_command(inner, workers);
            record = make_record(inner, "sweep-point",
                                 Json{{"grid_point", point}, {"status", "ok"},
                                      {"result", res.result}},
                                 started, utc_timestamp());
            ++ran;
        } catch (const std::exception& e) {
            record = make_record(spec, "sweep-point",
                                 Json{{"grid_point", point}, {"status", "error"},
                                      {"error", e.what()}},
                                 started, utc_timestamp());
            ++failed;
        }
        append_jsonl(*spec.out, {record});
    }
    Json summary{{"target", target}, {"points", total}, {"ran", ran}, {"skipped", skipped},
                 {"failed", failed}};
    append_jsonl(*spec.out, {make_record(spec, "sweep-summary", summary, utc_timestamp(),
                                         utc_timestamp())});
    return summary;
}

Json emit_plotdata(const std::vector<Json>& records, const std::string& kind,
                   const std::string& out_dir) {
    Table t;
    std::string plot;
    if (kind == "theta-convergence") {
        auto res = results_of(records, "ztable");
        if (res.empty()) throw ValidationError("kind mismatch: no ztable records for theta-convergence");
        t.columns = {"N", "estimate", "theta_ref"};
        std::vector<std::vector<Json>> rows;
        for (auto& [spec, r] : res)
            for (const auto& row : r["rows"])
                rows.push_back({row["N"], row["estimate"], row["theta_ref"]});
        std::sort(rows.begin(), rows.end(),
                  [](auto& a, auto& b) { return a[0].template get<double>() < b[0].template get<double>(); });
        t.rows = rows;
        plot = "set logscale x\nset xlabel 'N'\nset ylabel 'estimate'\n"
               "plot 'theta-convergence.csv' using 1:2 with linespoints title 'finite N', \\\n"
               "     '' using 1:3 with lines title 'limit'\n";
    } else if (kind == "lambda-c") {
        auto res = results_of(records, "lambda-c");
        if (res.empty()) throw ValidationError("kind mismatch: no lambda-c records");
        t.columns = {"N", "scaled_estimate", "katori_lower", "theta_ref"};
        std::map<std::string, double> theta_cache;
        for (auto& [spec, r] : res) {
            RunSpec s = run_spec_from_json(spec);
            auto key = s.kernel.describe();
            if (!theta_cache.count(key)) theta_cache[key] = theta(s.kernel, 1e-6).value;
            const double d = s.d;
            t.rows.push_back({r["N"], r["scaled"], 1.0 / (2 * d * (2 * d - 1)), theta_cache[key]});
        }
        std::sort(t.rows.begin(), t.rows.end(),
                  [](auto& a, auto& b) { return a[0].template get<double>() < b[0].template get<double>(); });
        plot = "set xlabel 'N'\nset ylabel '(lambda_c - 1) N'\n"
               "plot 'lambda-c.csv' using 1:2 with linespoints title 'estimate', \\\n"
               "     '' using 1:3 with lines title 'lower constant', \\\n"
               "     '' using 1:4 with lines title 'limit constant'\n";
    } else if (kind == "decay") {
        auto res = results_of(records, "check decay-bound");
        if (res.empty()) throw ValidationError("kind mismatch: no decay-bound records");
        t.columns = {"t", "m_hat", "bound_envelope"};
        for (const auto& row : res.back().second["rows"])
            t.rows.push_back({row["t"], row["m_hat"], row["bound_envelope"]});
        plot = "set logscale y\nset xlabel 't'\nset ylabel 'mean population'\n"
               "plot 'decay.csv' using 1:2 with linespoints title 'estimate', \\\n"
               "     '' using 1:3 with lines title 'envelope'\n";
    } else {
        throw ValidationError("unknown plot kind '" + kind +
                              "' (expected theta-convergence, lambda-c or decay)");
    }
    std::filesystem::create_directories(out_dir);
    const std::string csv = out_dir + "/" + kind + ".csv";
    const std::string gp = out_dir + "/" + kind + ".gp";
    write_text(csv, to_csv(t));
    write_text(gp, "set datafile separator ','\nset key autotitle columnhead\n" + plot);
    return Json{{"kind", kind}, {"rows", t.rows.size()}, {"csv", csv}, {"script", gp}};
}

}  // namespace stircp
