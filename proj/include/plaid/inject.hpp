#pragma once

#include <cstdint>
#include <optional>

#include "plaid/nn.hpp"

namespace plaid {

/// True when `next` keeps every width of `base` and only appends inputs
/// and/or adds a terrain branch that `base` lacks.
bool extends(const NetworkSpec& base, const NetworkSpec& next);

/// Grows `net` to `new_spec` without changing its function. Old tensors are
/// copied bit-exactly, new branch internals are drawn like init_network, and
/// every weight from a new input or branch unit into the old pathway is zero.
/// The branch seed defaults to one derived from the network's own seed.
/// Throws ConfigError unless `new_spec` strictly extends the current spec.
Network inject_inputs(const Network& net, const NetworkSpec& new_spec,
                      std::optional<std::uint64_t> seed = std::nullopt);

/// inject_inputs with the default 50-sample terrain branch added.
Network attach_terrain_branch(const Network& net, const TerrainBranchSpec& branch = {},
                              std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace plaid
