#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "plaid/curriculum.hpp"

namespace plaid {

/// Parsed experiment file. `seed` is the master seed when the file sets one.
struct LoadedConfig {
  ExperimentConfig experiment;
  std::optional<std::uint64_t> seed;
  /// Task trained by the single-task `train` command (defaults to the first plan task).
  std::optional<std::string> train_task;
};

/// YAML document with sections plan, network, train, distill, evaluation and
/// env (biped, terrain). Every key is optional and falls back to the built-in
/// default; unknown keys and bad values throw ConfigError prefixed with
/// `<source>:<line>:<column>:`.
LoadedConfig parse_config(std::string_view text, const std::string& source = "<config>");

/// Throws ConfigError naming the path when the file cannot be read.
LoadedConfig load_config(const std::filesystem::path& path);

/// Fully resolved configuration in the same format; parse_config(to_yaml(c)) == c.
std::string config_yaml(const LoadedConfig& cfg);

}  // namespace plaid
