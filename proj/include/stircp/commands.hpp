#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stircp/io.hpp"

namespace stircp {

struct CommandResult {
    Json result = Json::object();
    std::optional<Table> detail;   // written as CSV when requested
    std::vector<Json> per_replica; // simulate only
    bool check_failed = false;     // verify / check outcome
};

// Runs the command a RunSpec describes. Results do not depend on workers.
CommandResult run_command(const RunSpec& spec, int workers);

// Executes every point of options.grid (keys N, theta, kernel, replicas) for
// the command in options.target, appending one record per point and a
// summary record to spec.out. Points with an existing "ok" record are
// skipped; a failing point is recorded as an error and the sweep goes on.
Json run_sweep(const RunSpec& spec, int workers);

// Writes <out_dir>/<kind>.csv and <out_dir>/<kind>.gp from result records.
// Kinds: theta-convergence, lambda-c, decay.
Json emit_plotdata(const std::vector<Json>& records, const std::string& kind,
                   const std::string& out_dir);

}  // namespace stircp
