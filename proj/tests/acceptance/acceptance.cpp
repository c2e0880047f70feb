// Acceptance checks, one per criterion: acceptance --criterion K [--cli PATH]
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stircp/commands.hpp"
#include "stircp/estimators.hpp"
#include "stircp/green.hpp"
#include "stircp/io.hpp"
#include "stircp/parallel.hpp"
#include "stircp/walks.hpp"

using namespace stircp;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int precision = 6) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

RunSpec cli_spec(const std::string& command, const Json& flags) {
    return resolve_spec(command, Json(nullptr), flags);
}

Verdict green_origin() {
    auto spec = cli_spec("green", {{"params", {{"d", 3}}},
                                   {"tol", 1e-3},
                                   {"options", {{"x", {0, 0, 0}}, {"method", "both"}}}});
    Json r = run_command(spec, 1).result;
    const double dp = r["dp"]["value"], integral = r["integral"]["value"];
    const double diff = std::abs(dp - integral);
    const bool ok = std::abs(dp - 1.5164) <= 1e-3 && diff <= 1e-3;
    return {ok, "G(0)=" + fmt(dp, 10) + " integral=" + fmt(integral, 10) + " |diff|=" +
                    fmt(diff, 3) + " (target 1.5164 +- 1e-3, agreement 1e-3)"};
}

Verdict theta_nearest_neighbor() {
    const double tol = 5e-6;
    auto general = theta(BranchKernel::nearest_neighbor(3), tol);
    const double special = theta_nn(3, tol);
    const double diff = std::abs(general.value - special);
    const bool ok = diff <= 1e-5 && std::abs(general.value - 0.0861) <= 1e-3;
    return {ok, "theta=" + fmt(general.value, 10) + " theta_nn=" + fmt(special, 10) +
                    " |diff|=" + fmt(diff, 3) + " (limit 1e-5; value 0.0861 +- 1e-3)"};
}

Verdict theta_two_routes() {
    const double tol = 1e-6;
    const std::vector<std::pair<std::string, std::map<int, double>>> kernels = {
        {"p1=1", {{1, 1.0}}}, {"p1=p2=1/2", {{1, 0.5}, {2, 0.5}}}, {"p3=1", {{3, 1.0}}}};
    bool ok = true;
    std::string detail;
    for (const auto& [name, w] : kernels) {
        BranchKernel k(3, w);
        auto a = theta(k, tol);
        auto b = theta_via_walk_sum(k, tol);
        const double diff = std::abs(a.value - b.value);
        const bool agree = diff <= a.tol + b.tol;
        ok &= agree;
        detail += name + ": " + fmt(a.value, 10) + " vs " + fmt(b.value, 10) + " |diff|=" +
                  fmt(diff, 3) + (agree ? " ok; " : " FAIL; ");
    }
    return {ok, detail + "combined tolerance " + fmt(2 * tol, 3)};
}

Verdict atlas() {
    bool ok = true;
    std::string detail;
    for (int d : {3, 4, 5}) {
        auto c = verify_atlas(build_atlas(d));
        ok &= c.ok;
        detail += "d=" + std::to_string(d) + (c.ok ? " exact; " : " " + c.failures.front() + "; ");
    }
    return {ok, detail};
}

Verdict exit_law(int workers) {
    bool ok = true;
    std::string detail;
    for (auto type : {WalkType::V, WalkType::W}) {
        auto e = exit_distribution(type, 3, unit_vector(0), 100000,
                                   type == WalkType::V ? 11 : 12, workers);
        const bool in = std::abs(e.p_J1 - 0.2) <= 0.005 && e.censored == 0;
        ok &= in;
        detail += to_string(type) + ": p_J1=" + fmt(e.p_J1) + " se=" + fmt(e.std_error, 3) +
                  (in ? " ok; " : " FAIL; ");
    }
    return {ok, detail + "target 1/5 +- 0.005, 1e5 replicas"};
}

Verdict occupation(int workers) {
    auto spec = cli_spec("verify occupation", {{"replicas", 100000},
                                               {"seed", 21},
                                               {"options", {{"ells", {1, 2, 3}}}}});
    Json r = run_command(spec, workers).result;
    std::string detail;
    for (const auto& row : r["rows"])
        detail += "l=" + row["ell"].dump() + " z_VW=" + fmt(row["z_VW"], 3) +
                  " z_VP=" + fmt(row["z_VP"], 3) + "; ";
    return {r["pass"].get<bool>(), detail + "limit 3 combined sigma, 1e5 replicas"};
}

Verdict branching_mean(int workers) {
    bool ok = true;
    std::string detail;
    std::vector<double> grid;
    for (int i = 0; i <= 6; ++i) grid.push_back(0.5 * i);
    for (double th : {0.0, 1.0}) {
        SimParams p;
        p.d = 3;
        p.N = 10;
        p.theta = th;
        p.suppression = false;
        p.seed = 31;
        auto c = estimate_curves(p, grid, 1, 10000, workers);
        double worst = 0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double se = c.m_hat.stderrs[i];
            const double gap = c.m_hat.means[i] - std::exp(th * grid[i]);
            const double z = se > 0 ? gap / se : (gap == 0 ? 0.0 : INFINITY);
            worst = std::max(worst, std::abs(z));
        }
        ok &= worst <= 3;
        detail += "theta=" + fmt(th, 2) + " max|z|=" + fmt(worst, 3) + " m(3)=" +
                  fmt(c.m_hat.means.back()) + " vs " + fmt(std::exp(3 * th)) + "; ";
    }
    return {ok, detail + "1e4 replicas, t in 0:3:0.5"};
}

Verdict moment_identity(int workers) {
    SimParams p;
    p.d = 3;
    p.N = 10;
    p.theta = 0;
    p.seed = 41;
    std::vector<double> grid;
    for (int i = 0; i <= 100; ++i) grid.push_back(0.01 * i);
    auto r = check_moment_identity(p, grid, 1, 20000, workers);
    std::string detail = "max|z|=" + fmt(r.max_abs_z, 3) + " over " +
                         std::to_string(r.rows.size()) + " grid points, 2e4 replicas";
    for (const auto& w : r.warnings) detail += "; warning: " + w;
    return {r.within_3sigma, detail};
}

Verdict theta_limit() {
    auto t = theta_limit_table(BranchKernel::nearest_neighbor(3), {25, 50, 100, 200}, 1e-7);
    const double ref = t.limit.theta_ref;
    const auto& first = t.rows.front();
    const auto& last = t.rows.back();
    const bool within = last.relative_gap <= 0.15;
    const bool closer = std::abs(last.estimate - ref) < std::abs(first.estimate - ref);
    std::string detail;
    for (const auto& r : t.rows)
        detail += "N=" + fmt(r.N, 4) + " " + fmt(r.estimate) + "; ";
    detail += "theta=" + fmt(ref) + " final ratio " + fmt(last.estimate / ref, 4) +
              " (needs within 15%: " + (within ? "yes" : "no") +
              ", closer than first: " + (closer ? "yes" : "no") + ")";
    return {within && closer, detail};
}

Verdict z1_cross_check(int workers) {
    SimParams p;
    p.d = 3;
    p.N = 50;
    p.theta = 0;
    p.genealogy = true;
    p.seed = 51;
    auto mc = estimate_z1(p, {1}, 100000, workers);
    auto z = z1_semianalytic(3, 50, 0, BranchKernel::nearest_neighbor(3), 1, 1e-12);
    const auto& m = mc.by_ell.at(1);
    const double score = (m.mean - z.value) / m.std_error;
    return {std::abs(score) <= 3,
            "simulated " + fmt(m.mean) + " +- " + fmt(m.std_error, 3) + " formula " +
                fmt(z.value) + " z=" + fmt(score, 3) + " (exact split law " +
                fmt(z.exact_split_law) + "; split-alive " + fmt(mc.split_both_alive.mean) +
                " vs " + fmt(mc.split_both_alive_formula) + ")"};
}

Verdict critical_trend(int workers) {
    std::vector<double> scaled, se;
    std::string detail;
    for (int N : {5, 10, 20}) {
        SimParams p;
        p.d = 3;
        p.N = N;
        p.seed = 61;
        LambdaCOptions o;
        o.threshold_times_N = 0.25;
        o.replicas = 20000;
        o.lambda_lo = 1.0;
        o.lambda_hi = 1.0 + 2.0 / N;
        o.workers = workers;
        StopRule proxy;
        proxy.t_max = 50.0;
        proxy.pop_cap = 100;
        auto e = lambda_c_estimate(p, proxy, o);
        scaled.push_back(e.scaled);
        se.push_back(e.scaled_stderr);
        detail += "N=" + std::to_string(N) + " " + fmt(e.scaled, 4) + " +- " +
                  fmt(e.scaled_stderr, 2) + "; ";
    }
    bool ok = true;
    for (double s : scaled) ok &= s > 0;
    for (std::size_t i = 0; i + 1 < scaled.size(); ++i)
        ok &= scaled[i + 1] <= scaled[i] + 2 * std::hypot(se[i], se[i + 1]);
    const double vt = theta_nn(3, 1e-6);
    const bool near = scaled.back() >= 0.2 * vt && scaled.back() <= 5 * vt;
    return {ok, detail + "positive and non-increasing within 2 combined sigma; final/" +
                    "limit " + fmt(scaled.back() / vt, 3) + (near ? " (within 5x)" : "")};
}

std::string run_cli(const std::string& cli, const std::string& args) {
    const std::string cmd = cli + " " + args;
    std::array<char, 4096> buf;
    std::string out;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("cannot run " + cmd);
    while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
    if (pclose(pipe) != 0) throw std::runtime_error("command failed: " + cmd);
    return strip_timestamps(parse_json_text(out, cmd)).dump();
}

Verdict determinism(const std::string& cli) {
    if (cli.empty()) return {false, "no --cli path given"};
    const std::vector<std::string> commands = {
        "simulate --N 5 --theta 0.5 --replicas 300 --t-max 5 --seed 7",
        "survival --N 5 --theta 1 --replicas 300 --pop-cap 100 --seed 7",
        "curves --N 10 --theta 0.5 --replicas 300 --t-grid 0:1:0.25 --seed 7",
        "verify exit --replicas 3000 --seed 7",
        "verify z1 --replicas 3000 --seed 7",
    };
    bool ok = true;
    std::string detail;
    for (const auto& c : commands) {
        const auto a = run_cli(cli, c + " --workers 1");
        const auto b = run_cli(cli, c + " --workers 1");
        const auto w = run_cli(cli, c + " --workers 8");
        const bool same = a == b && a == w;
        ok &= same;
        detail += c.substr(0, c.find(" --")) + (same ? " identical; " : " DIFFERS; ");
    }
    return {ok, detail + "two runs and workers 1 vs 8"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    int criterion = 0;
    std::string cli;
    int workers = default_workers();
    app.add_option("--criterion", criterion, "criterion number 1-12")->required();
    app.add_option("--cli", cli, "path to the stircp binary");
    app.add_option("--workers", workers, "worker threads");
    CLI11_PARSE(app, argc, argv);

    const std::map<int, std::pair<double, std::function<Verdict()>>> checks = {
        {1, {30, green_origin}},
        {2, {30, theta_nearest_neighbor}},
        {3, {120, theta_two_routes}},
        {4, {5, atlas}},
        {5, {120, [&] { return exit_law(workers); }}},
        {6, {300, [&] { return occupation(workers); }}},
        {7, {300, [&] { return branching_mean(workers); }}},
        {8, {600, [&] { return moment_identity(workers); }}},
        {9, {300, theta_limit}},
        {10, {600, [&] { return z1_cross_check(workers); }}},
        {11, {1800, [&] { return critical_trend(workers); }}},
        {12, {60, [&] { return determinism(cli); }}},
    };
    auto it = checks.find(criterion);
    if (it == checks.end()) {
        std::cerr << "unknown criterion " << criterion << "\n";
        return 2;
    }
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = it->second.second();
    } catch (const std::exception& e) {
        v = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double budget = it->second.first;
    const bool in_time = secs <= budget;
    const bool pass = v.pass && in_time;
    std::cout << "criterion " << criterion << ": " << (pass ? "PASS" : "FAIL") << " | "
              << v.detail << " | " << fmt(secs, 3) << " s of " << budget << " s"
              << (in_time ? "" : " (over budget)") << std::endl;
    return pass ? 0 : 1;
}
