#pragma once

#include <filesystem>

#include "fwnet/tensor.hpp"
#include "fwnet/types.hpp"

namespace fwnet {

/// Reads an 8/16-bit gray or color PNG into (C,H,W) floats in [0,1], C 1 or 3.
Tensor read_png(const std::filesystem::path& path);

/// Writes a (1,H,W) or (3,H,W) [0,1] tensor as an 8-bit PNG.
void write_png(const std::filesystem::path& path, const Tensor& image);

/// Masks are stored as single-channel PNGs with values {0,255}.
void write_mask_png(const std::filesystem::path& path, const Mask& mask);
Mask read_mask_png(const std::filesystem::path& path,
                   MaskProvenance provenance = MaskProvenance::manual);

/// Center-aligned bilinear resize with edge clamping (image semantics; flow
/// fields use the corner-aligned resize in warp.hpp).
Tensor resize_bilinear(const Tensor& image, int target_height, int target_width);

/// ITU-R BT.601 luminance; 1-channel input passes through.
Tensor to_grayscale(const Tensor& image);

}  // namespace fwnet
