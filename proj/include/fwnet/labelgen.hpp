#pragma once

#include <vector>

#include "fwnet/tensor.hpp"
#include "fwnet/types.hpp"

// Raw ground-truth generation: multiscale Hessian vesselness (dark ridges on
// bright background) followed by local-mean adaptive binarization and small
// component cleanup. Purely per-frame; labels carry no temporal information.

namespace fwnet::label {

struct VesselnessConfig {
  std::vector<float> scales = {1.f, 2.f, 3.f};  // Gaussian sigmas, pixels
  float beta = 0.5f;                            // blobness sensitivity
  float c = 0.f;  // structureness scale; 0 = half of the per-image max
  bool normalize = true;  // per-image max-normalize the response
  void validate() const;
};

/// Ridge response in [0,1] (per-image max-normalized). Input is converted to
/// grayscale by luminance first.
TensorT<float> vesselness(const Frame& frame, const VesselnessConfig& config = {});

/// Foreground where response exceeds the local window mean plus offset;
/// connected components smaller than min_area pixels are removed
/// (8-connectivity). Window must be odd and >= 3.
Mask adaptive_binarize(const TensorT<float>& response, int window = 31, float offset = 0.02f,
                       int min_area = 20);

struct LabelGenConfig {
  VesselnessConfig vesselness;
  int window = 31;
  float offset = 0.02f;
  int min_area = 20;
};

/// vesselness + adaptive_binarize per frame, provenance raw_pseudo_label.
std::vector<Mask> generate_raw_labels(const std::vector<Frame>& frames,
                                      const LabelGenConfig& config = {});

/// Separable Gaussian blur (kernel truncated at 3 sigma), used by the
/// vesselness filter and exposed for tests.
TensorT<float> gaussian_blur(const TensorT<float>& image, float sigma);

}  // namespace fwnet::label
