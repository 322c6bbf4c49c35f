#pragma once

#include <filesystem>

#include "fwnet/warp.hpp"

namespace fwnet {

// Middlebury .flo flow files: the float 202021.25 ("PIEH" in little-endian
// bytes), int32 width, int32 height, then row-major interleaved (dx,dy)
// float32 pairs.

void write_flo(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flo(const std::filesystem::path& path);

}  // namespace fwnet
