#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sketchedit/training.hpp"

namespace sketchedit {

/// Training configuration file: one `key = value` per line, `#` starts a
/// comment, blank lines ignored. Keys are dotted (`net.width`,
/// `warp.max_area`, `train.steps`, ...); unknown keys are a ConfigError.
/// Parsing starts from the defaults and validates the result.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);

/// Sets one key; throws ConfigError on unknown keys or unparsable values.
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Renders every key with its current value and a one-line description.
std::string format_train_config(const TrainConfig& cfg);

std::vector<std::string> config_keys();

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace sketchedit
