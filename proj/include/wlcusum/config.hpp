#pragma once

#include <string>

#include "wlcusum/montecarlo.hpp"

namespace wlcusum {

inline constexpr const char* kToolVersion = "0.1.0";

/// Parses an experiment config (JSON). A run manifest is also accepted, in
/// which case its "config" member is used. Unknown keys raise UsageError
/// naming the key.
SweepConfig parse_sweep_config(const std::string& json_text);

/// Resolved config as JSON text; parse_sweep_config() inverts it.
std::string sweep_config_to_json(const SweepConfig& config);

/// Run manifest: resolved config, derived thresholds, tool version, timestamp.
std::string make_manifest(const SweepConfig& config, const std::string& command,
                          const std::string& output_path);

/// Model from CLI-style fields. `dimension` 0 means "infer from theta".
Model make_model(const std::string& family, std::size_t dimension, double barrier, double variance,
                 std::size_t theta_size);

}  // namespace wlcusum
