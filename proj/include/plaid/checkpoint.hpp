#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "plaid/nn.hpp"

namespace plaid {

/// Magic prefix of a .plaidckpt file: tag line followed by the format version.
inline constexpr std::string_view kCheckpointMagic = "PLAIDCKPT\n";
inline constexpr std::string_view kCheckpointVersion = "1";
inline constexpr std::string_view kCheckpointExtension = ".plaidckpt";

/// Text header (version, spec, seed, update counter, layer count) followed by
/// one record per tensor: a `layer <name> <shape>` line and the row-major
/// little-endian float32 payload. Momentum buffers are not stored.
std::string save_checkpoint(const Network& net);

/// Throws FormatError (bad magic or header), VersionError, TruncationError
/// or ShapeError (layer record disagrees with the header spec; names the layer).
Network load_checkpoint(std::string_view bytes);

void write_checkpoint(const Network& net, const std::filesystem::path& path);
Network read_checkpoint(const std::filesystem::path& path);

/// Reads only the header spec; cheap width checks before a full load.
NetworkSpec read_checkpoint_spec(const std::filesystem::path& path);

}  // namespace plaid
