#pragma once

#include <vector>

#include "fwnet/nn.hpp"
#include "fwnet/types.hpp"
#include "fwnet/warp.hpp"

// Compact flow estimator: a FlowNet-simple style stack of stride-2
// convolutions over a channel-stacked frame pair, with every layer's kernel
// count halved, plus a near-zero-initialized 3x3 prediction head emitting a
// 2-channel flow at 1/2^layers resolution. Displacements are in
// full-resolution pixel units (resolution_scale = 2^layers).

namespace fwnet {

struct FlowNetConfig {
  int input_size = 256;
  int in_channels = 6;  // two stacked RGB frames
  std::vector<int> channels = {32, 64, 128, 128, 256, 256};
  std::vector<int> kernels = {7, 5, 5, 3, 3, 3};

  int layers() const { return static_cast<int>(channels.size()); }
  int output_size() const { return input_size >> layers(); }
  void validate() const;
  bool operator==(const FlowNetConfig&) const = default;
};

template <typename T>
class FlowNetT {
 public:
  struct Cache {
    std::vector<typename nn::Conv2d<T>::Cache> convs;
    std::vector<TensorT<T>> activations;  // post-relu conv outputs
    typename nn::Conv2d<T>::Cache head;
  };

  void init(const FlowNetConfig& config, Rng rng);

  /// Flow over the stacked pair (frame_i on top). Grid is
  /// input_size / 2^layers per side; resolution_scale = 2^layers.
  FlowFieldT<T> forward(const TensorT<T>& stacked_pair, Cache* cache = nullptr) const;

  /// Backward from d(loss)/d(flow); accumulates parameter gradients.
  void backward(const Cache& cache, const FlowFieldT<T>& grad_flow);

  std::vector<nn::ParamT<T>*> params();
  size_t param_count() const;
  /// Parameters in the 6 stride-2 convolutions (the head excluded).
  size_t conv_stack_param_count() const;
  const FlowNetConfig& config() const { return config_; }

 private:
  FlowNetConfig config_;
  std::vector<nn::Conv2d<T>> convs_;
  nn::Conv2d<T> head_;
};

using FlowNet = FlowNetT<float>;

/// Deterministic construction from a seed (substream "flownet"). The head
/// starts near zero so the untrained network predicts (almost) zero flow.
template <typename T>
FlowNetT<T> flownet_init(uint64_t seed, const FlowNetConfig& config = {}) {
  FlowNetT<T> net;
  net.init(config, Rng(seed).stream("flownet"));
  return net;
}

/// Channel-stack two equally shaped frames (frame_i first).
template <typename T>
TensorT<T> stack_pair(const TensorT<T>& frame_i, const TensorT<T>& frame_j) {
  require(frame_i.same_shape(frame_j), "stack_pair: frame shapes differ");
  return nn::concat_channels(frame_i, frame_j);
}

/// Conv-stack parameter count of the unhalved reference schedule
/// (FlowNet-simple's conv encoder at full kernel counts) for the same input
/// channel count.
size_t flownet_unhalved_reference_param_count(int in_channels);

/// Conv-stack parameter count of the same 6-layer taper without halving
/// (each layer's kernel count doubled).
size_t flownet_unhalved_taper_param_count(const FlowNetConfig& config);

extern template class FlowNetT<float>;
extern template class FlowNetT<double>;

}  // namespace fwnet
