#pragma once

#include <stdexcept>
#include <string>

namespace plaid {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid specification, plan or configuration value.
struct ConfigError : Error {
  using Error::Error;
};

/// Width or parameter-shape mismatch.
struct ShapeError : Error {
  using Error::Error;
};

/// API misuse (backward without forward, empty batch, ...).
struct UsageError : Error {
  using Error::Error;
};

/// Checkpoint is not a checkpoint (bad magic, malformed header).
struct FormatError : Error {
  using Error::Error;
};

struct VersionError : Error {
  using Error::Error;
};

struct TruncationError : Error {
  using Error::Error;
};

/// Non-finite simulation state; the episode is aborted.
struct SimulationFault : Error {
  using Error::Error;
};

/// Terrain query past the end of the heightfield.
struct TerminalRegionError : Error {
  using Error::Error;
};

/// A lineage node lacks the evaluation a table needs.
struct MissingEvalError : Error {
  MissingEvalError(std::string node_id, const std::string& what)
      : Error(what), node(std::move(node_id)) {}
  std::string node;
};

}  // namespace plaid
