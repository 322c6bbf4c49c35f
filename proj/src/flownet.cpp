#include "fwnet/flownet.hpp"

namespace fwnet {

void FlowNetConfig::validate() const {
  require(!channels.empty() && channels.size() == kernels.size(),
          "flownet: channels/kernels size mismatch");
  for (int c : channels) require(c >= 1, "flownet: channels must be positive");
  for (int k : kernels) require(k >= 1 && k % 2 == 1, "flownet: kernels must be odd");
  require(input_size >= (1 << layers()),
          "flownet: input_size too small for " + std::to_string(layers()) + " stride-2 layers");
  require(input_size % (1 << layers()) == 0,
          "flownet: input_size must be divisible by 2^layers");
}

template <typename T>
void FlowNetT<T>::init(const FlowNetConfig& config, Rng rng) {
  config.validate();
  config_ = config;
  convs_.clear();
  convs_.resize(config.layers());
  int in = config.in_channels;
  for (int i = 0; i < config.layers(); ++i) {
    const int k = config.kernels[i];
    convs_[i].init("flow.c" + std::to_string(i + 1), in, config.channels[i], k, 2, k / 2, rng);
    in = config.channels[i];
  }
  head_.init("flow.head", in, 2, 3, 1, 1, rng);
  // Near-zero (not zero) head: the tent-kernel derivative is 0 exactly at
  // integer alignment, so an exactly-zero initial flow would freeze the flow
  // branch; a tiny initial flow keeps |dp| well under half a pixel while
  // leaving the warp gradient alive.
  for (size_t i = 0; i < head_.w.value.numel(); ++i) head_.w.value[i] *= T(1e-3);
  head_.b.value.zero();
}

template <typename T>
FlowFieldT<T> FlowNetT<T>::forward(const TensorT<T>& stacked_pair, Cache* cache) const {
  require(stacked_pair.rank() == 3 && stacked_pair.dim(0) == config_.in_channels,
          "flownet: expected " + std::to_string(config_.in_channels) + " stacked channels, got " +
              stacked_pair.shape_str());
  require(stacked_pair.dim(1) == config_.input_size && stacked_pair.dim(2) == config_.input_size,
          "flownet: expected " + std::to_string(config_.input_size) + "px input, got " +
              stacked_pair.shape_str());

  if (cache) {
    cache->convs.resize(convs_.size());
    cache->activations.resize(convs_.size());
  }
  TensorT<T> x = stacked_pair;
  for (size_t i = 0; i < convs_.size(); ++i) {
    x = convs_[i].forward(x, cache ? &cache->convs[i] : nullptr);
    nn::relu_inplace(x);
    if (cache) cache->activations[i] = x;
  }
  TensorT<T> raw = head_.forward(x, cache ? &cache->head : nullptr);  // (2,h,w)

  const int h = raw.dim(1), w = raw.dim(2);
  FlowFieldT<T> flow(h, w);
  flow.resolution_scale = static_cast<T>(1 << config_.layers());
  const size_t plane = static_cast<size_t>(h) * w;
  for (size_t i = 0; i < plane; ++i) {
    flow.data[2 * i] = raw[i];              // dx
    flow.data[2 * i + 1] = raw[plane + i];  // dy
  }
  return flow;
}

template <typename T>
void FlowNetT<T>::backward(const Cache& cache, const FlowFieldT<T>& grad_flow) {
  const int h = grad_flow.height(), w = grad_flow.width();
  TensorT<T> g({2, h, w});
  const size_t plane = static_cast<size_t>(h) * w;
  for (size_t i = 0; i < plane; ++i) {
    g[i] = grad_flow.data[2 * i];
    g[plane + i] = grad_flow.data[2 * i + 1];
  }
  TensorT<T> gx = head_.backward(cache.head, g);
  for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i) {
    nn::relu_backward_inplace(cache.activations[i], gx);
    gx = convs_[i].backward(cache.convs[i], gx);
  }
}

template <typename T>
std::vector<nn::ParamT<T>*> FlowNetT<T>::params() {
  std::vector<nn::ParamT<T>*> out;
  for (auto& c : convs_) c.params(out);
  head_.params(out);
  return out;
}

template <typename T>
size_t FlowNetT<T>::param_count() const {
  size_t n = 0;
  auto& self = const_cast<FlowNetT<T>&>(*this);
  for (auto* p : self.params()) n += p->numel();
  return n;
}

template <typename T>
size_t FlowNetT<T>::conv_stack_param_count() const {
  size_t n = 0;
  for (const auto& c : convs_) n += c.w.numel() + c.b.numel();
  return n;
}

namespace {
size_t conv_params(int in, int out, int k) {
  return static_cast<size_t>(out) * in * k * k + out;
}
}  // namespace

size_t flownet_unhalved_reference_param_count(int in_channels) {
  // FlowNet-simple conv encoder, full kernel counts: conv1..conv6 including
  // the _1 stages.
  const int ch[] = {64, 128, 256, 256, 512, 512, 512, 512, 1024};
  const int ks[] = {7, 5, 5, 3, 3, 3, 3, 3, 3};
  size_t n = 0;
  int in = in_channels;
  for (int i = 0; i < 9; ++i) {
    n += conv_params(in, ch[i], ks[i]);
    in = ch[i];
  }
  return n;
}

size_t flownet_unhalved_taper_param_count(const FlowNetConfig& config) {
  size_t n = 0;
  int in = config.in_channels;
  for (int i = 0; i < config.layers(); ++i) {
    n += conv_params(in, 2 * config.channels[i], config.kernels[i]);
    in = 2 * config.channels[i];
  }
  return n;
}

template class FlowNetT<float>;
template class FlowNetT<double>;

}  // namespace fwnet
