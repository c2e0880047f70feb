#include "stircp/io.hpp"

#include <chrono>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "stircp/errors.hpp"

namespace stircp {

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
    return out;
}

std::string read_file(const std::string& path, const std::string& what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + what + " '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Option name -> expected JSON type for each command.
enum class Kind { number, integer, boolean, string, numbers, integers, point, object };

const std::map<std::string, std::map<std::string, Kind>>& option_schema() {
    static const std::map<std::string, std::map<std::string, Kind>> s = {
        {"simulate", {{"per_replica", Kind::boolean}}},
        {"survival", {}},
        {"lambda-c",
         {{"threshold", Kind::number},
          {"threshold_times_N", Kind::number},
          {"lambda_lo", Kind::number},
          {"lambda_hi", Kind::number},
          {"resolution", Kind::number},
          {"max_probes", Kind::integer}}},
        {"curves", {{"t_grid", Kind::numbers}, {"ell_max", Kind::integer}}},
        {"green", {{"x", Kind::point}, {"y", Kind::point}, {"method", Kind::string}}},
        {"theta", {{"method", Kind::string}}},
        {"ztable", {{"N_list", Kind::numbers}, {"mc", Kind::boolean}}},
        {"verify lemma-A", {{"d_list", Kind::integers}}},
        {"verify exit",
         {{"walk", Kind::string}, {"start", Kind::point}, {"step_cap", Kind::integer}}},
        {"verify occupation",
         {{"ells", Kind::integers}, {"horizons", Kind::numbers}, {"start", Kind::point}}},
        {"verify z1", {{"ells", Kind::integers}}},
        {"check moment-identity",
         {{"t_grid", Kind::numbers}, {"ell_max", Kind::integer}, {"growth_only", Kind::boolean}}},
        {"check decay-bound",
         {{"t_grid", Kind::numbers}, {"n_floor", Kind::integer}, {"vartheta", Kind::number}}},
        {"sweep", {{"grid", Kind::object}, {"target", Kind::string}, {"target_options", Kind::object}}},
        {"plotdata", {{"input", Kind::string}, {"kind", Kind::string}, {"out_dir", Kind::string}}},
        {"report", {{"input", Kind::string}, {"N_list", Kind::numbers}}},
        {"shell", {{"ell", Kind::integer}, {"list_points", Kind::boolean}}},
    };
    return s;
}

bool kind_matches(const Json& v, Kind k) {
    auto all = [&](auto pred) {
        if (!v.is_array()) return false;
        for (const auto& e : v)
            if (!pred(e)) return false;
        return true;
    };
    switch (k) {
        case Kind::number: return v.is_number();
        case Kind::integer: return v.is_number_integer();
        case Kind::boolean: return v.is_boolean();
        case Kind::string: return v.is_string();
        case Kind::numbers: return all([](const Json& e) { return e.is_number(); });
        case Kind::integers:
        case Kind::point: return all([](const Json& e) { return e.is_number_integer(); });
        case Kind::object: return v.is_object();
    }
    return false;
}

const char* kind_name(Kind k) {
    switch (k) {
        case Kind::number: return "a number";
        case Kind::integer: return "an integer";
        case Kind::boolean: return "a boolean";
        case Kind::string: return "a string";
        case Kind::numbers: return "an array of numbers";
        case Kind::integers: return "an array of integers";
        case Kind::point: return "an array of integer coordinates";
        case Kind::object: return "an object";
    }
    return "?";
}

Json sorted(const Json& obj) {
    std::map<std::string, Json> m;
    for (auto it = obj.begin(); it != obj.end(); ++it) m[it.key()] = it.value();
    Json out = Json::object();
    for (auto& [k, v] : m) out[k] = v;
    return out;
}

}  // namespace

Json kernel_to_json(const BranchKernel& k) {
    Json p = Json::object();
    for (auto& [ell, w] : k.weights()) p[std::to_string(ell)] = w;
    return Json{{"d", k.dim()}, {"p", p}};
}

BranchKernel kernel_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("d") || !j.contains("p"))
        throw ValidationError("kernel must be an object {\"d\": ..., \"p\": {...}}");
    if (!j["d"].is_number_integer()) throw ValidationError("kernel field 'd' must be an integer");
    if (!j["p"].is_object() || j["p"].empty())
        throw ValidationError("kernel field 'p' must be a non-empty object");
    const int d = j["d"].get<int>();
    std::map<int, double> w;
    for (auto it = j["p"].begin(); it != j["p"].end(); ++it) {
        int ell = 0;
        try {
            std::size_t used = 0;
            ell = std::stoi(it.key(), &used);
            if (used != it.key().size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw ValidationError("kernel radius '" + it.key() + "' is not an integer");
        }
        if (!it.value().is_number())
            throw ValidationError("kernel weight for radius " + it.key() + " is not a number");
        w[ell] = it.value().get<double>();
    }
    double sum = 0;
    for (auto& [ell, p] : w) sum += p;
    // Already normalized weights are kept bit-for-bit.
    if (std::abs(sum - 1.0) <= 1e-12) return BranchKernel(d, std::move(w));
    return BranchKernel::normalized(d, std::move(w), 1e-9);
}

BranchKernel load_kernel_file(const std::string& path) {
    return kernel_from_json(parse_json_text(read_file(path, "kernel file"), path));
}

Json parse_json_text(const std::string& text, const std::string& source) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ValidationError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                              ": JSON syntax error");
    }
}

Json load_json_file(const std::string& path) {
    return parse_json_text(read_file(path, "config file"), path);
}

double RunSpec::effective_theta() const {
    if (lambda) return N * (*lambda - 1);
    return theta.value_or(0.0);
}

SimParams RunSpec::sim_params() const {
    SimParams p;
    p.d = d;
    p.N = N;
    p.theta = effective_theta();
    p.kernel = kernel;
    p.scale = scale;
    p.suppression = suppression;
    p.genealogy = genealogy;
    p.seed = seed;
    p.stop = stop;
    return p;
}

Json to_json(const RunSpec& s) {
    Json params;
    params["d"] = s.d;
    params["N"] = s.N;
    if (s.lambda) params["lambda"] = *s.lambda;
    else if (s.theta) params["theta"] = *s.theta;
    params["kernel"] = kernel_to_json(s.kernel);
    params["scale"] = to_string(s.scale);
    params["suppression"] = s.suppression;
    params["genealogy"] = s.genealogy;
    Json stop = Json::object();
    if (s.stop.t_max) stop["t_max"] = *s.stop.t_max;
    if (s.stop.pop_cap) stop["pop_cap"] = *s.stop.pop_cap;
    Json outputs = Json::object();
    if (s.out) outputs["out"] = *s.out;
    if (s.csv) outputs["csv"] = *s.csv;
    Json j;
    j["command"] = s.command;
    j["params"] = params;
    j["seed"] = s.seed;
    j["replicas"] = s.replicas;
    j["stop"] = stop;
    j["tol"] = s.tol;
    j["outputs"] = outputs;
    j["options"] = sorted(s.options);
    return j;
}

RunSpec run_spec_from_json(const Json& j) {
    std::vector<std::string> errors;
    RunSpec s;
    if (!j.is_object()) throw ValidationError("run spec must be a JSON object");

    auto field = [&](const Json& obj, const char* key, const std::string& path, auto check,
                     const char* expect) -> const Json* {
        if (!obj.contains(key)) return nullptr;
        const Json& v = obj[key];
        if (!check(v)) {
            errors.push_back(path + " must be " + expect);
            return nullptr;
        }
        return &v;
    };
    auto is_int = [](const Json& v) { return v.is_number_integer(); };
    auto is_uint = [](const Json& v) {
        return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
    };
    auto is_num = [](const Json& v) { return v.is_number(); };
    auto is_bool = [](const Json& v) { return v.is_boolean(); };
    auto is_str = [](const Json& v) { return v.is_string(); };

    for (auto it = j.begin(); it != j.end(); ++it) {
        static const std::set<std::string> known = {"command", "params",  "seed",    "replicas",
                                                    "stop",    "tol",     "outputs", "options"};
        if (!known.count(it.key())) errors.push_back("unknown field '" + it.key() + "'");
    }

    if (auto v = field(j, "command", "command", is_str, "a string")) s.command = v->get<std::string>();
    else errors.push_back("command is missing");
    const auto& schema = option_schema();
    if (!s.command.empty() && !schema.count(s.command))
        errors.push_back("unknown command '" + s.command + "'");

    Json params = j.contains("params") ? j["params"] : Json::object();
    if (!params.is_object()) {
        errors.push_back("params must be an object");
        params = Json::object();
    }
    for (auto it = params.begin(); it != params.end(); ++it) {
        static const std::set<std::string> known = {"d",     "N",           "theta",    "lambda",
                                                    "kernel", "scale", "suppression", "genealogy"};
        if (!known.count(it.key())) errors.push_back("unknown field 'params." + it.key() + "'");
    }
    if (auto v = field(params, "d", "params.d", is_int, "an integer")) {
        s.d = v->get<int>();
        if (s.d < 1 || s.d > kMaxDim)
            errors.push_back("params.d must lie in [1, " + std::to_string(kMaxDim) + "]");
        static const std::set<std::string> transient_only = {
            "green", "theta", "ztable", "verify exit", "verify occupation", "verify z1",
            "check decay-bound", "report"};
        if (s.d >= 1 && s.d < 3 && transient_only.count(s.command))
            errors.push_back("command '" + s.command + "' needs params.d >= 3");
    }
    if (auto v = field(params, "N", "params.N", is_int, "an integer")) {
        s.N = v->get<int>();
        if (s.N < 1) errors.push_back("params.N must be >= 1");
    }
    if (auto v = field(params, "theta", "params.theta", is_num, "a number")) s.theta = v->get<double>();
    if (auto v = field(params, "lambda", "params.lambda", is_num, "a number")) s.lambda = v->get<double>();
    if (s.theta && s.lambda) errors.push_back("give params.theta or params.lambda, not both");
    if (s.N >= 1 && s.N + s.effective_theta() < 0)
        errors.push_back("branching rate 1 + theta/N must be >= 0");
    if (auto v = field(params, "scale", "params.scale", is_str, "a string")) {
        try {
            s.scale = parse_time_scale(v->get<std::string>());
        } catch (const ValidationError& e) {
            errors.push_back(std::string("params.scale: ") + e.what());
        }
    }
    if (auto v = field(params, "suppression", "params.suppression", is_bool, "a boolean"))
        s.suppression = v->get<bool>();
    if (auto v = field(params, "genealogy", "params.genealogy", is_bool, "a boolean"))
        s.genealogy = v->get<bool>();
    if (params.contains("kernel")) {
        try {
            s.kernel = kernel_from_json(params["kernel"]);
            if (s.kernel.dim() != s.d)
                errors.push_back("kernel dimension " + std::to_string(s.kernel.dim()) +
                                 " differs from params.d = " + std::to_string(s.d));
        } catch (const ValidationError& e) {
            errors.push_back(std::string("params.kernel: ") + e.what());
        }
    } else if (s.d >= 1 && s.d <= kMaxDim) {
        s.kernel = BranchKernel::nearest_neighbor(s.d);
    }

    if (auto v = field(j, "seed", "seed", is_uint, "a non-negative integer")) s.seed = v->get<std::uint64_t>();
    if (auto v = field(j, "replicas", "replicas", is_uint, "a non-negative integer")) {
        s.replicas = v->get<std::uint64_t>();
        if (s.replicas < 1) errors.push_back("replicas must be >= 1");
    }
    if (auto v = field(j, "tol", "tol", is_num, "a number")) {
        s.tol = v->get<double>();
        if (!(s.tol > 0)) errors.push_back("tol must be positive");
    }
    if (j.contains("stop")) {
        const Json& st = j["stop"];
        if (!st.is_object()) {
            errors.push_back("stop must be an object");
        } else {
            for (auto it = st.begin(); it != st.end(); ++it)
                if (it.key() != "t_max" && it.key() != "pop_cap")
                    errors.push_back("unknown field 'stop." + it.key() + "'");
            if (auto v = field(st, "t_max", "stop.t_max", is_num, "a number")) {
                s.stop.t_max = v->get<double>();
                if (!(*s.stop.t_max >= 0)) errors.push_back("stop.t_max must be >= 0");
            }
            if (auto v = field(st, "pop_cap", "stop.pop_cap", is_uint, "a non-negative integer"))
                s.stop.pop_cap = v->get<std::size_t>();
        }
    }
    if (j.contains("outputs")) {
        const Json& o = j["outputs"];
        if (!o.is_object()) {
            errors.push_back("outputs must be an object");
        } else {
            for (auto it = o.begin(); it != o.end(); ++it)
                if (it.key() != "out" && it.key() != "csv")
                    errors.push_back("unknown field 'outputs." + it.key() + "'");
            if (auto v = field(o, "out", "outputs.out", is_str, "a string")) s.out = v->get<std::string>();
            if (auto v = field(o, "csv", "outputs.csv", is_str, "a string")) s.csv = v->get<std::string>();
        }
    }
    if (j.contains("options")) {
        const Json& o = j["options"];
        if (!o.is_object()) {
            errors.push_back("options must be an object");
        } else if (schema.count(s.command)) {
            const auto& allowed = schema.at(s.command);
            for (auto it = o.begin(); it != o.end(); ++it) {
                auto a = allowed.find(it.key());
                if (a == allowed.end())
                    errors.push_back("unknown option '" + it.key() + "' for command '" + s.command + "'");
                else if (!kind_matches(it.value(), a->second))
                    errors.push_back("options." + it.key() + " must be " + kind_name(a->second));
            }
            s.options = sorted(o);
        }
    }
    if (!errors.empty()) throw ValidationError(join(errors, "; "));
    return s;
}

std::string serialize(const RunSpec& s) { return to_json(s).dump(); }

std::uint64_t default_seed() {
    const char* env = std::getenv("STIRCP_SEED");
    if (!env || !*env) return 0;
    char* end = nullptr;
    errno = 0;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (errno || *end || env[0] == '-')
        throw ValidationError(std::string("STIRCP_SEED must be a non-negative integer, got '") +
                              env + "'");
    return v;
}

Json command_defaults(const std::string& command) {
    Json d;
    d["command"] = command;
    d["params"] = {{"d", 3}, {"N", 10}, {"scale", "speeded"}, {"suppression", true},
                   {"genealogy", false}};
    d["seed"] = default_seed();
    d["replicas"] = 1;
    d["tol"] = 1e-6;
    d["options"] = Json::object();
    const bool sim = command == "simulate" || command == "survival" || command == "lambda-c" ||
                     command == "sweep";
    if (sim) d["stop"] = {{"t_max", 50.0}, {"pop_cap", 500}};
    auto grid = [](double end, int n) {
        Json g = Json::array();
        for (int i = 0; i <= n; ++i) g.push_back(end * i / n);
        return g;
    };
    if (command == "simulate") {
        d["replicas"] = 100;
    } else if (command == "survival") {
        d["replicas"] = 500;
    } else if (command == "lambda-c") {
        d["replicas"] = 200;
        d["options"] = {{"threshold", 0.05}, {"lambda_lo", 1.0}, {"lambda_hi", 3.0},
                        {"max_probes", 40}};
    } else if (command == "curves") {
        d["replicas"] = 1000;
        d["options"] = {{"t_grid", grid(1.0, 10)}, {"ell_max", 1}};
    } else if (command == "green" || command == "theta") {
        d["options"] = {{"method", "both"}};
    } else if (command == "ztable") {
        d["tol"] = 1e-7;
        d["replicas"] = 100000;
        d["options"] = {{"N_list", {25, 50, 100, 200}}, {"mc", false}};
    } else if (command == "verify lemma-A") {
        d["options"] = {{"d_list", {3, 4, 5}}};
    } else if (command == "verify exit") {
        d["replicas"] = 100000;
        d["options"] = {{"walk", "both"}, {"step_cap", 10000000}};
    } else if (command == "verify occupation") {
        d["replicas"] = 100000;
        d["params"]["N"] = 1;
        d["options"] = {{"ells", {1, 2, 3}}, {"horizons", {5.0}}};
    } else if (command == "verify z1") {
        d["replicas"] = 100000;
        d["params"]["N"] = 50;
        d["params"]["genealogy"] = true;
        d["options"] = {{"ells", {1}}};
    } else if (command == "check moment-identity") {
        d["replicas"] = 20000;
        d["options"] = {{"t_grid", grid(1.0, 100)}, {"growth_only", false}};
    } else if (command == "check decay-bound") {
        d["replicas"] = 1000;
        d["params"]["N"] = 50;
        d["options"] = {{"t_grid", grid(20.0, 20)}, {"n_floor", 10}};
    } else if (command == "sweep") {
        d["replicas"] = 100;
    } else if (command == "report") {
        d["options"] = {{"N_list", {10, 100, 1000}}};
    } else if (command == "shell") {
        d["options"] = {{"ell", 1}, {"list_points", false}};
    }
    return d;
}

RunSpec resolve_spec(const std::string& command, const Json& config, const Json& flags) {
    Json merged = command_defaults(command);
    auto apply = [&](Json patch, const std::string& source) {
        if (patch.is_null()) return;
        if (!patch.is_object()) throw ValidationError(source + " must be a JSON object");
        if (patch.contains("params") && patch["params"].is_object() &&
            patch["params"].contains("kernel") && patch["params"]["kernel"].is_string()) {
            patch["params"]["kernel"] = kernel_to_json(load_kernel_file(patch["params"]["kernel"]));
        }
        // A kernel in the patch replaces the previous one rather than merging weights.
        if (patch.contains("params") && patch["params"].is_object() &&
            patch["params"].contains("kernel") && merged["params"].contains("kernel"))
            merged["params"].erase("kernel");
        // theta and lambda are alternatives; the later source wins.
        if (patch.contains("params") && patch["params"].is_object()) {
            if (patch["params"].contains("lambda")) merged["params"].erase("theta");
            if (patch["params"].contains("theta")) merged["params"].erase("lambda");
        }
        merged.merge_patch(patch);
    };
    apply(config, "config");
    apply(flags, "flags");
    merged["command"] = command;
    // The default kernel follows the dimension.
    if (!merged["params"].contains("kernel") && merged["params"]["d"].is_number_integer()) {
        int d = merged["params"]["d"].get<int>();
        if (d >= 1 && d <= kMaxDim)
            merged["params"]["kernel"] = kernel_to_json(BranchKernel::nearest_neighbor(d));
    }
    return run_spec_from_json(merged);
}

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Json make_record(const RunSpec& spec, const std::string& kind, Json result,
                 const std::string& started, const std::string& finished) {
    Json r;
    r["schema_version"] = kSchemaVersion;
    r["kind"] = kind;
    r["artifact_version"] = kArtifactVersion;
    r["rng_scheme"] = kRngScheme;
    r["run_spec"] = to_json(spec);
    r["started"] = started;
    r["finished"] = finished;
    r["result"] = std::move(result);
    return r;
}

Json strip_timestamps(Json record) {
    record.erase("started");
    record.erase("finished");
    return record;
}

void append_jsonl(const std::string& path, const std::vector<Json>& records) {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw ResourceError("cannot open '" + path + "' for appending");
    for (const auto& r : records) out << r.dump() << '\n';
    out.flush();
    if (!out) throw ResourceError("write to '" + path + "' failed");
}

std::vector<std::string> validate_record(const Json& r) {
    std::vector<std::string> p;
    if (!r.is_object()) return {"record is not an object"};
    if (!r.contains("schema_version") || !r["schema_version"].is_number_integer())
        p.push_back("missing schema_version");
    else if (r["schema_version"].get<int>() != kSchemaVersion)
        p.push_back("unsupported schema_version " + r["schema_version"].dump());
    for (const char* key : {"kind", "artifact_version", "rng_scheme", "started", "finished"})
        if (!r.contains(key) || !r[key].is_string()) p.push_back(std::string("missing ") + key);
    if (!r.contains("run_spec")) {
        p.push_back("missing run_spec");
    } else {
        try {
            run_spec_from_json(r["run_spec"]);
        } catch (const ValidationError& e) {
            p.push_back(std::string("invalid run_spec: ") + e.what());
        }
    }
    if (!r.contains("result")) p.push_back("missing result");
    return p;
}

std::vector<Json> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open results file '" + path + "'");
    std::vector<Json> out;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (line.empty()) continue;
        Json r;
        try {
            r = Json::parse(line);
        } catch (const Json::parse_error&) {
            throw ValidationError(path + ":" + std::to_string(n) + ": not valid JSON");
        }
        auto problems = validate_record(r);
        if (!problems.empty())
            throw ValidationError(path + ":" + std::to_string(n) + ": " + join(problems, "; "));
        out.push_back(std::move(r));
    }
    return out;
}

std::string to_csv(const Table& t) {
    std::string s = join(t.columns, ",") + "\n";
    for (const auto& row : t.rows) {
        std::vector<std::string> cells;
        for (const auto& v : row) {
            if (v.is_string()) {
                auto text = v.get<std::string>();
                if (text.find_first_of(",\"\n") != std::string::npos) {
                    std::string q = "\"";
                    for (char c : text) q += c == '"' ? std::string("\"\"") : std::string(1, c);
                    text = q + "\"";
                }
                cells.push_back(text);
            }
            else if (v.is_number_float() && std::isinf(v.get<double>()))
                cells.push_back(v.get<double>() > 0 ? "inf" : "-inf");
            else cells.push_back(v.dump());
        }
        s += join(cells, ",") + "\n";
    }
    return s;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ResourceError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw ResourceError("write to '" + path + "' failed");
}

std::vector<double> parse_number_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        char* end = nullptr;
        double v = std::strtod(item.c_str(), &end);
        if (item.empty() || *end) throw ValidationError("'" + item + "' is not a number");
        out.push_back(v);
    }
    if (out.empty()) throw ValidationError("empty number list");
    return out;
}

std::vector<int> parse_int_range(const std::string& s) {
    auto dots = s.find("..");
    auto to_int = [&](const std::string& t) {
        char* end = nullptr;
        long v = std::strtol(t.c_str(), &end, 10);
        if (t.empty() || *end) throw ValidationError("'" + t + "' is not an integer");
        return static_cast<int>(v);
    };
    std::vector<int> out;
    if (dots != std::string::npos) {
        int a = to_int(s.substr(0, dots)), b = to_int(s.substr(dots + 2));
        if (a > b) throw ValidationError("empty range '" + s + "'");
        for (int i = a; i <= b; ++i) out.push_back(i);
        return out;
    }
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_int(item));
    if (out.empty()) throw ValidationError("empty integer list");
    return out;
}

std::vector<double> parse_time_grid(const std::string& s) {
    if (s.find(':') == std::string::npos) return parse_number_list(s);
    std::stringstream ss(s);
    std::string a, b, c;
    std::getline(ss, a, ':');
    std::getline(ss, b, ':');
    std::getline(ss, c);
    auto v = parse_number_list(a + "," + b + "," + c);
    const double start = v[0], end = v[1], step = v[2];
    if (!(step > 0) || !(end > start))
        throw ValidationError("time grid '" + s + "' needs start < end and step > 0");
    const long n = std::lround((end - start) / step);
    if (n < 1 || std::abs(n * step - (end - start)) > 1e-9 * (end - start))
        throw ValidationError("time grid step does not divide '" + s + "'");
    std::vector<double> out;
    for (long i = 0; i <= n; ++i) out.push_back(start + (end - start) * i / n);
    return out;
}

}  // namespace stircp
