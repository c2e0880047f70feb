#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stircp/kernel.hpp"
#include "stircp/simulator.hpp"

namespace stircp {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr const char* kRngScheme =
    "philox4x32-10; key=seed; counter=(block, purpose, replica)";

// Kernel literal {"d": 3, "p": {"1": 0.5, "2": 0.5}}. Weights must sum to 1
// within 1e-9 and are renormalized.
Json kernel_to_json(const BranchKernel& k);
BranchKernel kernel_from_json(const Json& j);
BranchKernel load_kernel_file(const std::string& path);

// Parses a JSON document; syntax errors name the source, line and column.
Json parse_json_text(const std::string& text, const std::string& source);
Json load_json_file(const std::string& path);

// Complete description of one experiment. Worker count is deliberately not
// part of it: results must not depend on it.
struct RunSpec {
    std::string command;
    int d = 3;
    int N = 10;
    std::optional<double> theta;
    std::optional<double> lambda;  // alternative to theta: lambda = 1 + theta/N
    BranchKernel kernel = BranchKernel::nearest_neighbor(3);
    TimeScale scale = TimeScale::speeded;
    bool suppression = true;
    bool genealogy = false;
    std::uint64_t seed = 0;
    std::uint64_t replicas = 1;
    StopRule stop;
    double tol = 1e-6;
    std::optional<std::string> out;
    std::optional<std::string> csv;
    // Command-specific settings with keys in sorted order.
    Json options = Json::object();

    double effective_theta() const;
    SimParams sim_params() const;

    bool has(const std::string& key) const { return options.contains(key); }
    template <typename T>
    T opt(const std::string& key) const {
        return options.at(key).get<T>();
    }
};

Json to_json(const RunSpec& s);
// Validates and collects every problem into one ValidationError.
RunSpec run_spec_from_json(const Json& j);
std::string serialize(const RunSpec& s);

// Built-in defaults for a command in RunSpec shape.
Json command_defaults(const std::string& command);

// Effective configuration: defaults, then the config document, then flags,
// each applied as a JSON merge patch. A string "kernel" is read as a path.
RunSpec resolve_spec(const std::string& command, const Json& config, const Json& flags);

// Seed from STIRCP_SEED, else 0.
std::uint64_t default_seed();

std::string utc_timestamp();

// ResultRecord: schema stamp, version, RNG scheme, embedded RunSpec,
// timestamps and the payload under "result".
Json make_record(const RunSpec& spec, const std::string& kind, Json result,
                 const std::string& started, const std::string& finished);
// Copy without the wall-clock fields, for reproducibility comparisons.
Json strip_timestamps(Json record);

void append_jsonl(const std::string& path, const std::vector<Json>& records);
// Reads and validates every line; errors name the file and line.
std::vector<Json> read_jsonl(const std::string& path);
// Problems with a record's required fields; empty when valid.
std::vector<std::string> validate_record(const Json& record);

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Json>> rows;
};
std::string to_csv(const Table& t);
void write_text(const std::string& path, const std::string& text);

// "25,50,100"
std::vector<double> parse_number_list(const std::string& s);
// "3..5" or "3,4,5"
std::vector<int> parse_int_range(const std::string& s);
// "start:end:step" or a comma list
std::vector<double> parse_time_grid(const std::string& s);

}  // namespace stircp
