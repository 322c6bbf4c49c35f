#pragma once

#include <filesystem>

#include "fwnet/fwnet.hpp"

namespace fwnet {

// Checkpoint container: "FWNC" magic, format version, a JSON header carrying
// the architecture configs, the iteration counter and a named tensor table
// (shape + byte offset), followed by a raw little-endian float32 blob.
// Parameter values and momentum buffers are stored per parameter name;
// loading rebuilds the networks from the stored configs and validates every
// tensor shape against them.

void save_checkpoint(const std::filesystem::path& path, const FwNet& model,
                     uint64_t iteration = 0);

struct LoadedCheckpoint {
  FwNet model;
  uint64_t iteration = 0;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fwnet
