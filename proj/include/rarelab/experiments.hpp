#pragma once

#include "rarelab/report.hpp"

#include <string>
#include <vector>

namespace rarelab {

struct ExperimentInfo {
    std::string name;
    /// Library module the experiment exercises.
    std::string module;
    std::string description;
};

/// Every named experiment, sorted by name.
std::vector<ExperimentInfo> list_experiments();

/// Complete configuration with default values; it doubles as the schema (keys and types).
ordered_json default_config(const std::string& experiment);

/**
 * Overlays `overrides` on the defaults of `experiment`. Unknown keys and values whose type
 * differs from the default throw ConfigError naming the field path. A top-level
 * "experiment" key is accepted if it names the same experiment.
 */
ordered_json merge_config(const std::string& experiment, const ordered_json& base, const ordered_json& overrides);
ordered_json merge_config(const std::string& experiment, const ordered_json& overrides);

/// Sets the value at a dotted path (e.g. "hole.z"), which must exist in the defaults.
void set_config_path(const std::string& experiment, ordered_json& config, const std::string& path,
                     const ordered_json& value);

/// "start:ratio:count" with start and ratio as decimals or powers "a^b", e.g. "2^-5:0.5:6".
ordered_json parse_ladder_spec(const std::string& spec);
/// Decimal number or a power "a^b"; errors name `field`.
double parse_number(const std::string& text, const std::string& field = "value");

struct RunOptions {
    /// Directory for cached closed operators; empty disables caching. Cached and rebuilt
    /// operators are identical, so results do not depend on it.
    std::string operatorCache;
};

/// Runs an experiment on a merged configuration. The report's pass flag collects its acceptance checks.
Report run_experiment(const std::string& experiment, const ordered_json& config, const RunOptions& opts = {});

}  // namespace rarelab
