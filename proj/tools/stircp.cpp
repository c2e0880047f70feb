#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stircp/commands.hpp"
#include "stircp/errors.hpp"
#include "stircp/io.hpp"
#include "stircp/parallel.hpp"

using namespace stircp;

namespace {

// Flags only patch the run spec when they were given on the command line.
struct Patch {
    std::vector<std::pair<CLI::Option*, std::function<void(Json&)>>> setters;

    Json build() const {
        Json j = Json::object();
        for (const auto& [opt, set] : setters)
            if (opt->count() > 0) set(j);
        return j;
    }
};

struct Command {
    std::string name;
    CLI::App* app = nullptr;
    Patch patch;
    std::string config;
    int workers = 0;
    std::vector<std::string> raw_options;
};

Json int_array(const std::string& text) {
    Json a = Json::array();
    for (int v : parse_int_range(text)) a.push_back(v);
    return a;
}

Json number_array(const std::string& text) {
    Json a = Json::array();
    for (double v : parse_number_list(text)) a.push_back(v);
    return a;
}

Json time_grid(const std::string& text) {
    Json a = Json::array();
    for (double v : parse_time_grid(text)) a.push_back(v);
    return a;
}

Json point_array(const std::string& text) {
    Json a = Json::array();
    for (double v : parse_number_list(text)) a.push_back(static_cast<int>(v));
    return a;
}

template <typename T>
void flag(Command& c, const std::string& name, const std::string& help,
          std::function<void(Json&, const T&)> set) {
    auto value = std::make_shared<T>();
    auto* opt = c.app->add_option(name, *value, help);
    c.patch.setters.emplace_back(opt, [value, set](Json& j) { set(j, *value); });
}

void boolean(Command& c, const std::string& name, const std::string& help,
             std::function<void(Json&)> set) {
    auto* opt = c.app->add_flag(name, help);
    c.patch.setters.emplace_back(opt, std::move(set));
}

template <typename T>
std::function<void(Json&, const T&)> at(std::string a, std::string b) {
    return [a, b](Json& j, const T& v) { j[a][b] = v; };
}

template <typename T>
std::function<void(Json&, const T&)> top(std::string a) {
    return [a](Json& j, const T& v) { j[a] = v; };
}

std::function<void(Json&, const std::string&)> option_as(std::string key,
                                                          Json (*convert)(const std::string&)) {
    return [key, convert](Json& j, const std::string& v) { j["options"][key] = convert(v); };
}

void common_flags(Command& c, bool simulation) {
    c.app->add_option("--config", c.config, "JSON file with run settings");
    c.app->add_option("--workers", c.workers, "worker threads (results do not depend on it)");
    c.app->add_option("--option", c.raw_options, "command option as key=JSON, repeatable");
    flag<int>(c, "--d", "lattice dimension", at<int>("params", "d"));
    flag<int>(c, "--N", "scaling parameter", at<int>("params", "N"));
    flag<double>(c, "--theta", "branching excess", at<double>("params", "theta"));
    flag<double>(c, "--lambda", "birth rate (1 + theta/N)", at<double>("params", "lambda"));
    flag<std::string>(c, "--kernel", "kernel JSON file", at<std::string>("params", "kernel"));
    flag<std::uint64_t>(c, "--seed", "master seed", top<std::uint64_t>("seed"));
    flag<std::uint64_t>(c, "--replicas", "independent replicas", top<std::uint64_t>("replicas"));
    flag<double>(c, "--tol", "numerical tolerance", top<double>("tol"));
    flag<std::string>(c, "--out", "append JSONL records here", at<std::string>("outputs", "out"));
    flag<std::string>(c, "--csv", "write the result table here", at<std::string>("outputs", "csv"));
    if (!simulation) return;
    flag<std::string>(c, "--scale", "original or speeded", at<std::string>("params", "scale"));
    boolean(c, "--no-suppression", "let particles share sites",
            [](Json& j) { j["params"]["suppression"] = false; });
    boolean(c, "--genealogy", "keep particle labels",
            [](Json& j) { j["params"]["genealogy"] = true; });
    flag<double>(c, "--t-max", "time horizon", at<double>("stop", "t_max"));
    flag<std::uint64_t>(c, "--pop-cap", "population cap", at<std::uint64_t>("stop", "pop_cap"));
}

Json raw_option_patch(const std::vector<std::string>& raw) {
    Json j = Json::object();
    for (const auto& item : raw) {
        auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ValidationError("--option expects key=JSON, got '" + item + "'");
        const std::string key = item.substr(0, eq);
        j["options"][key] = parse_json_text(item.substr(eq + 1), "--option " + key);
    }
    return j;
}

int emit(const RunSpec& spec, const CommandResult& res, const std::string& started) {
    const std::string finished = utc_timestamp();
    Json record = make_record(spec, spec.command == "sweep" ? "sweep-summary" : "aggregate",
                              res.result, started, finished);
    if (spec.out && spec.command != "sweep") {
        std::vector<Json> records;
        for (const auto& r : res.per_replica)
            records.push_back(make_record(spec, "replica", r, started, finished));
        records.push_back(record);
        append_jsonl(*spec.out, records);
    }
    if (spec.csv && res.detail) write_text(*spec.csv, to_csv(*res.detail));
    std::cout << record.dump() << "\n";
    return res.check_failed ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stirring contact process simulator and asymptotics toolkit", "stircp"};
    app.require_subcommand(1);
    std::vector<std::unique_ptr<Command>> commands;

    auto add = [&](CLI::App* parent, const std::string& sub, const std::string& name,
                   const std::string& help, bool simulation) -> Command& {
        auto c = std::make_unique<Command>();
        c->name = name;
        c->app = parent->add_subcommand(sub, help);
        common_flags(*c, simulation);
        commands.push_back(std::move(c));
        return *commands.back();
    };

    add(&app, "simulate", "simulate", "run replicas and summarize them", true);
    flag<bool>(*commands.back(), "--per-replica", "write one record per replica",
               [](Json& j, const bool& v) { j["options"]["per_replica"] = v; });

    add(&app, "survival", "survival", "estimate the survival probability", true);

    auto& lc = add(&app, "lambda-c", "lambda-c", "locate the critical birth rate", true);
    flag<double>(lc, "--threshold", "survival frequency at criticality",
                 at<double>("options", "threshold"));
    flag<double>(lc, "--threshold-times-N", "threshold given as c/N",
                 at<double>("options", "threshold_times_N"));
    flag<double>(lc, "--lambda-lo", "lower end of the bracket", at<double>("options", "lambda_lo"));
    flag<double>(lc, "--lambda-hi", "upper end of the bracket", at<double>("options", "lambda_hi"));
    flag<double>(lc, "--resolution", "bracket width to stop at", at<double>("options", "resolution"));
    flag<int>(lc, "--max-probes", "probe budget", at<int>("options", "max_probes"));

    auto& cu = add(&app, "curves", "curves", "mean population and pair-count curves", true);
    flag<std::string>(cu, "--t-grid", "times as start:end:step or a list",
                      option_as("t_grid", time_grid));
    flag<int>(cu, "--ell-max", "largest pair radius", at<int>("options", "ell_max"));

    auto& gr = add(&app, "green", "green", "random walk Green's function", false);
    flag<std::string>(gr, "--x", "first point, e.g. 0,0,0", option_as("x", point_array));
    flag<std::string>(gr, "--y", "second point", option_as("y", point_array));
    flag<std::string>(gr, "--method", "dp, integral or both", at<std::string>("options", "method"));

    auto& th = add(&app, "theta", "theta", "kernel constant of the critical value", false);
    flag<std::string>(th, "--method", "kernel-green, walk-sum or both",
                      at<std::string>("options", "method"));

    auto& zt = add(&app, "ztable", "ztable", "finite-N approximations of the kernel constant", false);
    flag<std::string>(zt, "--N-list", "values of N", option_as("N_list", number_array));
    boolean(zt, "--mc", "add Monte Carlo columns", [](Json& j) { j["options"]["mc"] = true; });

    auto* verify = app.add_subcommand("verify", "walk and lattice identities");
    verify->require_subcommand(1);
    auto& la = add(verify, "lemma-A", "verify lemma-A", "neighbourhood atlas of the unit shell", false);
    flag<std::string>(la, "--d-list", "dimensions, e.g. 3..5", option_as("d_list", int_array));
    auto& ex = add(verify, "exit", "verify exit", "exit law of V and W from the unit shell", false);
    flag<std::string>(ex, "--walk", "V, W or both", at<std::string>("options", "walk"));
    flag<std::string>(ex, "--start", "start point in the unit shell", option_as("start", point_array));
    flag<std::uint64_t>(ex, "--step-cap", "jump budget per walk",
                        at<std::uint64_t>("options", "step_cap"));
    auto& oc = add(verify, "occupation", "verify occupation", "shell occupation of V, W and D", false);
    flag<std::string>(oc, "--ells", "shell radii", option_as("ells", int_array));
    flag<std::string>(oc, "--horizons", "time horizons", option_as("horizons", number_array));
    flag<std::string>(oc, "--start", "start point", option_as("start", point_array));
    auto& z1 = add(verify, "z1", "verify z1", "first-split shell counts against the formula", true);
    flag<std::string>(z1, "--ells", "shell radii", option_as("ells", int_array));

    auto* check = app.add_subcommand("check", "Monte Carlo checks of moment relations");
    check->require_subcommand(1);
    auto& mi = add(check, "moment-identity", "check moment-identity",
                   "mean population against the pair-count integral", true);
    flag<std::string>(mi, "--t-grid", "times", option_as("t_grid", time_grid));
    flag<int>(mi, "--ell-max", "largest pair radius", at<int>("options", "ell_max"));
    boolean(mi, "--growth-only", "compare only the growth part",
            [](Json& j) { j["options"]["growth_only"] = true; });
    auto& db = add(check, "decay-bound", "check decay-bound", "mean population below the envelope", true);
    flag<std::string>(db, "--t-grid", "times", option_as("t_grid", time_grid));
    flag<int>(db, "--n-floor", "smallest N the envelope applies to", at<int>("options", "n_floor"));
    flag<double>(db, "--vartheta", "kernel constant override", at<double>("options", "vartheta"));

    auto& sw = add(&app, "sweep", "sweep", "run a command over a parameter grid", true);
    flag<std::string>(sw, "--target", "command to run at each point",
                      at<std::string>("options", "target"));
    flag<std::string>(sw, "--grid", "grid as a JSON object, e.g. {\"N\":[10,20]}",
                      [](Json& j, const std::string& v) {
                          j["options"]["grid"] = parse_json_text(v, "--grid");
                      });

    auto& rp = add(&app, "report", "report", "summarize records or tabulate asymptotics", false);
    flag<std::string>(rp, "--input", "JSONL file to summarize", at<std::string>("options", "input"));
    flag<std::string>(rp, "--N-list", "values of N", option_as("N_list", number_array));

    auto& pd = add(&app, "plotdata", "plotdata", "CSV and gnuplot files from records", false);
    flag<std::string>(pd, "--input", "JSONL records", at<std::string>("options", "input"));
    flag<std::string>(pd, "--kind", "theta-convergence, lambda-c or decay",
                      at<std::string>("options", "kind"));
    flag<std::string>(pd, "--out-dir", "output directory", at<std::string>("options", "out_dir"));

    auto& sh = add(&app, "shell", "shell", "size and points of an l1 shell", false);
    flag<int>(sh, "--ell", "radius", at<int>("options", "ell"));
    boolean(sh, "--list-points", "list the points", [](Json& j) { j["options"]["list_points"] = true; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        for (const auto& c : commands) {
            if (!c->app->parsed()) continue;
            Json config = c->config.empty() ? Json(nullptr) : load_json_file(c->config);
            if (config.is_object()) {
                config.erase("command");
                // Kernel paths in a config file are relative to that file.
                if (config.contains("params") && config["params"].is_object() &&
                    config["params"].contains("kernel") && config["params"]["kernel"].is_string()) {
                    std::filesystem::path k = config["params"]["kernel"].get<std::string>();
                    if (k.is_relative())
                        config["params"]["kernel"] =
                            (std::filesystem::path(c->config).parent_path() / k).string();
                }
            }
            Json flags = c->patch.build();
            flags.merge_patch(raw_option_patch(c->raw_options));
            RunSpec spec = resolve_spec(c->name, config, flags);
            const int workers = c->workers > 0 ? c->workers : default_workers();
            const std::string started = utc_timestamp();
            return emit(spec, run_command(spec, workers), started);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
