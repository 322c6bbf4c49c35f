#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "fwnet/types.hpp"

// Synthetic fluoroscopy-like sequences: a dark curvilinear "catheter"
// advancing along a smooth route over a textured background with static
// distractor curves, plus exact rasterized ground truth and controlled label
// corruption emulating the raw pseudo-label regime.

namespace fwnet::synth {

struct SynthConfig {
  int num_frames = 30;
  int image_size = 256;
  int curve_control_points = 6;
  float curve_width_min = 2.f;
  float curve_width_max = 4.f;
  float tip_advance_min = 2.f;  // pixels per frame
  float tip_advance_max = 8.f;
  float wiggle_amplitude = 1.5f;  // lateral body deformation, pixels
  float noise_sigma = 0.006f;
  int vessel_phantom_count = 2;
  float contrast_min = 0.3f;
  float contrast_max = 0.55f;
  uint64_t seed = 0;

  void validate() const;
};

struct NoiseConfig {
  int dilation_px = 0;
  int erosion_px = 0;
  float dropout_fraction = 0.f;   // fraction of foreground removed in chunks
  int false_positive_blobs = 0;   // spurious blobs added per frame
  uint64_t seed = 0;

  void validate() const;
};

struct Sequence {
  std::string id;
  std::vector<Frame> frames;
  std::vector<Mask> clean_masks;
  // generating geometry, kept for oracles and diagnostics
  std::vector<std::vector<std::array<float, 2>>> curves;  // per-frame body polyline (x,y)
  float curve_width = 0.f;
};

/// Deterministic per config.seed. Foreground stays under 5% of the image.
Sequence generate_sequence(const SynthConfig& config, const std::string& sequence_id = "seq");

/// Per-frame morphology, chunk dropout and false-positive blobs; output masks
/// carry raw_pseudo_label provenance. All-zero config returns the input.
std::vector<Mask> corrupt_labels(const std::vector<Mask>& masks, const NoiseConfig& noise);

// mask morphology on disk structuring elements (used by the corruptor and
// exposed for tests)
Mask dilate(const Mask& m, int radius);
Mask erode(const Mask& m, int radius);

}  // namespace fwnet::synth
