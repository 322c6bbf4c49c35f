#pragma once

#include <string>

#include "fwnet/tensor.hpp"

namespace fwnet {

/// One image of a sequence: (C,H,W) intensities in [0,1], C is 1 or 3.
struct Frame {
  Tensor data;
  std::string sequence_id;
  int index = 0;

  int channels() const { return data.rank() == 3 ? data.dim(0) : 0; }
  int height() const { return data.rank() == 3 ? data.dim(1) : 0; }
  int width() const { return data.rank() == 3 ? data.dim(2) : 0; }
};

enum class MaskProvenance { clean_synthetic, raw_pseudo_label, manual, predicted };

/// Per-pixel binary foreground/background labels aligned to a Frame.
struct Mask {
  TensorT<uint8_t> data;  // (H,W), values in {0,1}
  MaskProvenance provenance = MaskProvenance::manual;

  int height() const { return data.rank() == 2 ? data.dim(0) : 0; }
  int width() const { return data.rank() == 2 ? data.dim(1) : 0; }
  size_t foreground_count() const {
    size_t n = 0;
    for (size_t i = 0; i < data.numel(); ++i) n += data[i];
    return n;
  }
};

const char* provenance_name(MaskProvenance p);

}  // namespace fwnet
