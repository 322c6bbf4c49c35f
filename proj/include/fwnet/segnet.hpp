#pragma once

#include <optional>
#include <vector>

#include "fwnet/loss.hpp"
#include "fwnet/nn.hpp"
#include "fwnet/types.hpp"

// Encoder-decoder segmentation network. The encoder is a 7x7 stride-2 stem
// followed by residual blocks (conv-relu-conv + identity/projection skip,
// relu, 2x2 max pool), halving the resolution per block: 256 -> 128, 64, 32,
// 16, 8 at the default depth. The decoder mirrors it with 4x4 stride-2
// transposed convolutions, U-Net style skip concatenation and a 3x3 fuse
// conv per stage; a shared 1x1 two-class head classifies the full-resolution
// feature map.

namespace fwnet {

struct SegNetConfig {
  int input_size = 256;
  int in_channels = 3;
  std::vector<int> encoder_channels = {32, 64, 128, 256, 256};

  int blocks() const { return static_cast<int>(encoder_channels.size()); }
  int feature_channels() const { return encoder_channels.front(); }
  void validate() const;
  bool operator==(const SegNetConfig&) const = default;
};

template <typename T>
class SegNetT {
 public:
  struct EncBlock {
    nn::Conv2d<T> c1, c2;
    std::optional<nn::Conv2d<T>> proj;  // 1x1 projection when channels change
    nn::MaxPool2<T> pool;
  };
  struct DecBlock {
    nn::Deconv2d<T> up;
    nn::Conv2d<T> fuse;
    std::optional<nn::Conv2d<T>> fuse2;  // final stage only: boundary detail
    int skip_channels = 0;
  };

  struct Cache {
    typename nn::Conv2d<T>::Cache stem;
    TensorT<T> stem_out;
    struct Enc {
      typename nn::Conv2d<T>::Cache c1, c2, proj;
      TensorT<T> y1;        // conv1 output after relu
      TensorT<T> residual;  // block output after add+relu (pre-pool)
      typename nn::MaxPool2<T>::Cache pool;
    };
    std::vector<Enc> enc;
    std::vector<TensorT<T>> skip_sources;  // post-pool outputs feeding the decoder
    struct Dec {
      typename nn::Deconv2d<T>::Cache up;
      TensorT<T> up_out;  // after relu
      typename nn::Conv2d<T>::Cache fuse;
      TensorT<T> fuse_out;  // after relu
      typename nn::Conv2d<T>::Cache fuse2;
      TensorT<T> fuse2_out;
    };
    std::vector<Dec> dec;
    typename nn::Conv2d<T>::Cache head;
    TensorT<T> probabilities;
  };

  void init(const SegNetConfig& config, Rng rng);

  /// Full forward pass; populates cache when given (training path).
  SegOutputT<T> forward(const TensorT<T>& frame, Cache* cache = nullptr) const;

  /// Backward from d(loss)/d(logits), plus an optional extra gradient on the
  /// pre-classifier features (the warp branch feeds one in). Accumulates
  /// parameter gradients.
  void backward(const Cache& cache, const TensorT<T>& grad_logits,
                const TensorT<T>* grad_features_extra = nullptr);

  /// The shared classifier head (also applied to warped features).
  nn::Conv2d<T>& head() { return head_; }
  const nn::Conv2d<T>& head() const { return head_; }

  std::vector<nn::ParamT<T>*> params();
  size_t param_count() const;
  const SegNetConfig& config() const { return config_; }

  /// Spatial size after each encoder block for this config.
  std::vector<int> encoder_output_sizes() const;

 private:
  SegNetConfig config_;
  nn::Conv2d<T> stem_;
  std::vector<EncBlock> enc_;
  std::vector<DecBlock> dec_;
  nn::Conv2d<T> head_;
};

using SegNet = SegNetT<float>;

/// Deterministic construction from a seed (substream "segnet").
template <typename T>
SegNetT<T> segnet_init(uint64_t seed, const SegNetConfig& config = {}) {
  SegNetT<T> net;
  net.init(config, Rng(seed).stream("segnet"));
  return net;
}

extern template class SegNetT<float>;
extern template class SegNetT<double>;

}  // namespace fwnet
