#pragma once

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "fwnet/flownet.hpp"
#include "fwnet/loss.hpp"
#include "fwnet/segnet.hpp"
#include "fwnet/types.hpp"
#include "fwnet/warp.hpp"

// FW-Net: segmentation network + flow network + flow-guided warping,
// trained end-to-end on nearby frame pairs. The warp branch is a
// training-time device; inference runs the segmentation network per frame.

namespace fwnet {

struct TrainConfig {
  double learning_rate = 0.001;
  double momentum = 0.9;
  double lambda = 0.4;      // weight of the warped-frame loss
  int max_pair_offset = 6;  // 0 <= j - i <= max_pair_offset
  int batch_size = 4;
  int iterations = 1000;
  uint64_t seed = 0;
  int log_every = 50;
  SegNetConfig segnet;
  FlowNetConfig flownet;

  void validate() const;
};

/// A (frame, mask) sequence used for training or evaluation.
struct SequenceSample {
  std::string id;
  std::vector<Frame> frames;
  std::vector<Mask> masks;
};

struct FramePair {
  const Frame* frame_i = nullptr;
  const Frame* frame_j = nullptr;
  const Mask* mask_i = nullptr;
  const Mask* mask_j = nullptr;
  int offset = 0;
};

/// i uniform over frames, offset uniform over {0..min(max_offset, len-1-i)}.
FramePair sample_pair(const SequenceSample& sequence, int max_offset, Rng& rng);

/// Eq-style total loss on raw (summed) cross-entropies: L_s + lambda * L_w.
template <typename T>
double total_loss(const SegOutputT<T>& seg_i, const SegOutputT<T>& seg_j, const Mask& mask_i,
                  const Mask& mask_j, double lambda) {
  return weighted_ce_loss(seg_i.probabilities, mask_i) +
         lambda * weighted_ce_loss(seg_j.probabilities, mask_j);
}

template <typename T>
class FwNetT {
 public:
  SegNetT<T> segnet;
  FlowNetT<T> flownet;

  struct PairForward {
    SegOutputT<T> seg_i;
    SegOutputT<T> seg_j;  // probabilities over the warped features
    FlowFieldT<T> flow_coarse;
    FlowFieldT<T> flow_full;
    bool has_warp_branch = false;
    // training caches
    typename SegNetT<T>::Cache seg_cache;
    typename FlowNetT<T>::Cache flow_cache;
    typename nn::Conv2d<T>::Cache head_cache;
  };

  /// seg_i = segnet(frame_i); flow = resize_flow(flownet(stack), full);
  /// seg_j = softmax(head(warp(seg_i.features, flow))). The classifier head
  /// is shared with the segmentation network.
  PairForward forward_pair(const TensorT<T>& frame_i, const TensorT<T>& frame_j,
                           bool with_caches, bool with_warp_branch = true) const;

  /// Backward through both branches; grad_logits_j may be null when the warp
  /// branch was skipped (lambda == 0). Accumulates parameter gradients of all
  /// three components (segnet, flownet via the warp flow gradient, head).
  void backward_pair(PairForward& fw, const TensorT<T>& grad_logits_i,
                     const TensorT<T>* grad_logits_j);

  std::vector<nn::ParamT<T>*> params();
  void zero_grads();

  bool compatible_frame(const Frame& f) const {
    return f.channels() == segnet.config().in_channels &&
           f.height() == segnet.config().input_size && f.width() == segnet.config().input_size;
  }
};

using FwNet = FwNetT<float>;

/// Deterministic model construction: independent substreams per component.
template <typename T>
FwNetT<T> fwnet_init(uint64_t seed, const SegNetConfig& seg_cfg = {},
                     const FlowNetConfig& flow_cfg = {}) {
  FwNetT<T> net;
  net.segnet = segnet_init<T>(seed, seg_cfg);
  net.flownet = flownet_init<T>(seed, flow_cfg);
  return net;
}

struct LossRow {
  int iteration = 0;
  double loss_s = 0;  // per-pixel averaged segmentation term
  double loss_w = 0;  // per-pixel averaged warp term
  double total = 0;   // loss_s + lambda * loss_w
};

struct TrainResult {
  FwNet model;
  std::vector<LossRow> history;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int it, const std::string& what)
      : std::runtime_error(what), iteration(it) {}
  int iteration;
};

/// Called every observe_every iterations with the live model; returning
/// false stops training early (e.g. a target metric was reached).
using TrainObserver = std::function<bool(const FwNet& model, int iteration)>;

/// SGD with momentum at a fixed learning rate over sampled frame pairs,
/// minimizing the per-pixel-normalized total loss end to end. Deterministic
/// given (seed, config, dataset). Throws TrainingDiverged on non-finite loss.
/// Optionally streams "iteration loss_s loss_w loss" lines.
TrainResult train(const std::vector<SequenceSample>& dataset, const TrainConfig& config,
                  std::ostream* log = nullptr, const TrainObserver& observer = {},
                  int observe_every = 0);

/// Baseline trainer: the segmentation network alone on the frame_i terms,
/// with the identical sampling stream. Used by the lambda = 0 equivalence
/// check; the returned model carries an untrained flow network.
TrainResult train_segnet_only(const std::vector<SequenceSample>& dataset,
                              const TrainConfig& config, std::ostream* log = nullptr);

/// Per-frame argmax masks from the segmentation network. Never reads labels.
std::vector<Mask> infer_sequence(const FwNet& model, const std::vector<Frame>& frames);

/// Single-frame probabilities (inference path, no caches).
SegOutput infer_frame(const FwNet& model, const Frame& frame);

void write_loss_csv(const std::string& path, const std::vector<LossRow>& history);

extern template class FwNetT<float>;
extern template class FwNetT<double>;

}  // namespace fwnet
