#pragma once

#include <algorithm>
#include <cmath>

#include "fwnet/tensor.hpp"
#include "fwnet/types.hpp"

namespace fwnet {

/// Per-pixel class distribution plus the full-resolution pre-classifier
/// feature map a segmentation forward pass produces.
template <typename T>
struct SegOutputT {
  TensorT<T> probabilities;  // (2,H,W); channel 1 = foreground
  TensorT<T> features;       // (F,H,W)
};
using SegOutput = SegOutputT<float>;

constexpr double kFgWeightMin = 1e-4;
constexpr double kProbClip = 1e-7;

/// Foreground fraction |fg| / (|fg|+|bg|), clamped away from 0 and 1 so the
/// loss weights stay defined for all-foreground / all-background masks.
inline double fg_weight(const Mask& mask) {
  require(mask.data.numel() > 0, "fg_weight: empty mask");
  const double total = static_cast<double>(mask.data.numel());
  const double w = static_cast<double>(mask.foreground_count()) / total;
  return std::clamp(w, kFgWeightMin, 1.0 - kFgWeightMin);
}

/// Mean Eq-weight per pixel, 2w(1-w). Training normalizes the summed loss by
/// this times the pixel count so a fixed learning rate behaves like standard
/// mean-reduced cross-entropy training regardless of the class imbalance.
inline double balanced_loss_norm(const Mask& mask) {
  const double w = fg_weight(mask);
  return 2.0 * w * (1.0 - w);
}

/// Class-balanced pixel-wise cross-entropy:
///   L = -(1-w) * sum_fg log p(fg) - w * sum_bg log p(bg),
/// w = fg_weight(mask), probabilities clipped to [1e-7, 1-1e-7] before the
/// logarithm. Summed (not averaged) over pixels.
template <typename T>
double weighted_ce_loss(const TensorT<T>& probs, const Mask& mask) {
  require(probs.rank() == 3 && probs.dim(0) == 2,
          "weighted_ce_loss: probabilities must be (2,H,W), got " + probs.shape_str());
  require(probs.dim(1) == mask.height() && probs.dim(2) == mask.width(),
          "weighted_ce_loss: shape mismatch between probabilities " + probs.shape_str() +
              " and mask");
  const double w = fg_weight(mask);
  const size_t plane = static_cast<size_t>(probs.dim(1)) * probs.dim(2);
  double loss = 0;
  for (size_t i = 0; i < plane; ++i) {
    const double p_fg = std::clamp(static_cast<double>(probs[plane + i]), kProbClip,
                                   1.0 - kProbClip);
    if (mask.data[i])
      loss -= (1.0 - w) * std::log(p_fg);
    else
      loss -= w * std::log(1.0 - p_fg);
  }
  return loss;
}

/// d(weighted_ce_loss)/d(logits) for probabilities produced by a 2-class
/// softmax: per pixel weight * (p - onehot), scaled by `scale`. The
/// probability clip only guards the loss value; it is inactive on any input
/// the softmax actually produces at these magnitudes.
template <typename T>
TensorT<T> weighted_ce_grad_logits(const TensorT<T>& probs, const Mask& mask, T scale) {
  require(probs.rank() == 3 && probs.dim(0) == 2, "weighted_ce_grad_logits: bad probs shape");
  require(probs.dim(1) == mask.height() && probs.dim(2) == mask.width(),
          "weighted_ce_grad_logits: probs/mask shape mismatch");
  const T w = static_cast<T>(fg_weight(mask));
  const size_t plane = static_cast<size_t>(probs.dim(1)) * probs.dim(2);
  TensorT<T> g(probs.shape());
  for (size_t i = 0; i < plane; ++i) {
    const T p_bg = probs[i];
    const T p_fg = probs[plane + i];
    if (mask.data[i]) {
      g[i] = (T(1) - w) * p_bg * scale;
      g[plane + i] = (T(1) - w) * (p_fg - T(1)) * scale;
    } else {
      g[i] = w * (p_bg - T(1)) * scale;
      g[plane + i] = w * p_fg * scale;
    }
  }
  return g;
}

}  // namespace fwnet
