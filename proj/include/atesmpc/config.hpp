#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "atesmpc/sim.hpp"

namespace atesmpc {

class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// A full multi-mode experiment read from one JSON file.
struct RunConfig
{
    nlohmann::json source;  // the effective document, overrides applied
    std::vector<Mode> modes;
    std::map<Mode, int> horizons;
    SimulationConfig base;
    int fresh_samples = 10000;
    std::uint64_t validation_seed = 0;
    std::string output_dir = "out";
    std::vector<std::string> formats{"csv", "json"};

    SimulationConfig for_mode(Mode m) const;
    bool writes(const std::string& format) const;
};

/// The JSON schema (draft-07 subset) accepted by parse_run_config.
const nlohmann::json& config_schema();

/// Violations of the schema, each prefixed with the offending field path.
std::vector<std::string> schema_errors(const nlohmann::json& doc, const nlohmann::json& schema);

/// Schema check followed by semantic checks; throws ConfigError.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

} // namespace atesmpc
