#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "atesmpc/sim.hpp"

namespace atesmpc {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,       // bad arguments or unreadable / unwritable files
    kExitConfig = 2,      // schema or semantic config error, trace mismatch
    kExitModel = 3,       // simulated state left the admissible region
    kExitSolver = 4,      // solver failure or limit without a usable solution
};

struct RunOptions
{
    std::string config;
    std::vector<std::string> modes;
    std::optional<int> duration;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> fresh_samples;
    bool validate = true;
};

struct ValidateOptions
{
    std::string trace;
    std::string config;  // defaults to summary.json next to the trace
    std::optional<std::string> mode;
    std::optional<int> fresh_samples;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> out;
};

int cmd_run(const RunOptions& opt, std::ostream& log);
int cmd_validate(const ValidateOptions& opt, std::ostream& log);

nlohmann::json report_json(const ValidationReport& r);
nlohmann::json efficiency_json(const EfficiencyReport& r);

/// Parses argv (run / validate / schema) and dispatches.
int cli_main(int argc, char** argv);

} // namespace atesmpc
