#include "fwnet/segnet.hpp"

namespace fwnet {

void SegNetConfig::validate() const {
  require(input_size >= 4, "segnet: input_size too small");
  require(in_channels == 1 || in_channels == 3, "segnet: in_channels must be 1 or 3");
  require(blocks() >= 2, "segnet: need at least 2 encoder blocks");
  for (int c : encoder_channels) require(c >= 1, "segnet: encoder channels must be positive");
  int s = input_size;
  for (int i = 0; i < blocks(); ++i) {
    require(s % 2 == 0, "segnet: input_size not divisible by 2^blocks");
    s /= 2;
  }
  require(s >= 1, "segnet: too many blocks for input_size");
}

template <typename T>
void SegNetT<T>::init(const SegNetConfig& config, Rng rng) {
  config.validate();
  config_ = config;
  const auto& ec = config.encoder_channels;
  const int nb = config.blocks();

  stem_.init("stem", config.in_channels, ec[0], 7, 2, 3, rng);

  enc_.clear();
  enc_.resize(nb - 1);
  for (int i = 0; i < nb - 1; ++i) {
    const int cin = ec[i], cout = ec[i + 1];
    const std::string base = "enc" + std::to_string(i + 2);
    enc_[i].c1.init(base + ".c1", cin, cout, 3, 1, 1, rng);
    enc_[i].c2.init(base + ".c2", cout, cout, 3, 1, 1, rng);
    if (cin != cout) {
      enc_[i].proj.emplace();
      enc_[i].proj->init(base + ".proj", cin, cout, 1, 1, 0, rng);
    }
  }

  dec_.clear();
  dec_.resize(nb);
  int cur = ec[nb - 1];
  for (int j = 0; j < nb; ++j) {
    const bool last = j == nb - 1;
    const int out = last ? ec[0] : ec[nb - 2 - j];
    // the full-resolution stage concatenates the input frame itself (the
    // only encoder-side tensor at that resolution)
    const int skip = last ? config.in_channels : ec[nb - 2 - j];
    const std::string base = "dec" + std::to_string(j + 1);
    dec_[j].up.init(base + ".up", cur, out, 4, 2, 1, rng);
    dec_[j].fuse.init(base + ".fuse", out + skip, out, 3, 1, 1, rng);
    if (last) {
      dec_[j].fuse2.emplace();
      dec_[j].fuse2->init(base + ".fuse2", out, out, 3, 1, 1, rng);
    }
    dec_[j].skip_channels = skip;
    cur = out;
  }

  head_.init("head", ec[0], 2, 1, 1, 0, rng);
  // foreground prior around 12%: under the heavy class weighting this makes
  // early training grow the structure outward rather than carve a saturated
  // foreground back, which converges much faster to sharp boundaries
  head_.b.value[1] = T(-2);
}

template <typename T>
SegOutputT<T> SegNetT<T>::forward(const TensorT<T>& frame, Cache* cache) const {
  require(frame.rank() == 3, "segnet: frame must be (C,H,W)");
  require(frame.dim(0) == config_.in_channels && frame.dim(1) == config_.input_size &&
              frame.dim(2) == config_.input_size,
          "segnet: expected (" + std::to_string(config_.in_channels) + "," +
              std::to_string(config_.input_size) + "," + std::to_string(config_.input_size) +
              ") input, got " + frame.shape_str());

  Cache local;
  Cache& c = cache ? *cache : local;
  const int nb = config_.blocks();
  c.enc.resize(nb - 1);
  c.dec.resize(nb);
  c.skip_sources.clear();

  c.skip_sources.push_back(frame);
  TensorT<T> x = stem_.forward(frame, cache ? &c.stem : nullptr);
  nn::relu_inplace(x);
  c.stem_out = x;
  c.skip_sources.push_back(x);

  for (int i = 0; i < nb - 1; ++i) {
    auto& blk = enc_[i];
    auto& bc = c.enc[i];
    TensorT<T> y1 = blk.c1.forward(x, cache ? &bc.c1 : nullptr);
    nn::relu_inplace(y1);
    TensorT<T> y2 = blk.c2.forward(y1, cache ? &bc.c2 : nullptr);
    if (blk.proj) {
      TensorT<T> shortcut = blk.proj->forward(x, cache ? &bc.proj : nullptr);
      kernels::add_inplace(y2.data(), shortcut.data(), y2.numel());
    } else {
      kernels::add_inplace(y2.data(), x.data(), y2.numel());
    }
    nn::relu_inplace(y2);
    if (cache) {
      bc.y1 = y1;
      bc.residual = y2;
    }
    x = blk.pool.forward(y2, cache ? &bc.pool : nullptr);
    if (i + 1 < nb - 1) c.skip_sources.push_back(x);
  }

  for (int j = 0; j < nb; ++j) {
    auto& blk = dec_[j];
    auto& dc = c.dec[j];
    TensorT<T> up = blk.up.forward(x, cache ? &dc.up : nullptr);
    nn::relu_inplace(up);
    if (cache) dc.up_out = up;
    TensorT<T> fused_in = nn::concat_channels(up, c.skip_sources[nb - 1 - j]);
    TensorT<T> fused = blk.fuse.forward(fused_in, cache ? &dc.fuse : nullptr);
    nn::relu_inplace(fused);
    if (cache) dc.fuse_out = fused;
    if (blk.fuse2) {
      fused = blk.fuse2->forward(fused, cache ? &dc.fuse2 : nullptr);
      nn::relu_inplace(fused);
      if (cache) dc.fuse2_out = fused;
    }
    x = std::move(fused);
  }

  SegOutputT<T> out;
  out.features = x;
  TensorT<T> logits = head_.forward(x, cache ? &c.head : nullptr);
  out.probabilities = nn::softmax_channels(logits);
  if (cache) c.probabilities = out.probabilities;
  return out;
}

template <typename T>
void SegNetT<T>::backward(const Cache& cache, const TensorT<T>& grad_logits,
                          const TensorT<T>* grad_features_extra) {
  const int nb = config_.blocks();

  TensorT<T> g = head_.backward(cache.head, grad_logits);
  if (grad_features_extra) {
    require(g.same_shape(*grad_features_extra), "segnet backward: extra feature grad shape");
    kernels::add_inplace(g.data(), grad_features_extra->data(), g.numel());
  }

  // decoder, last stage first; collect gradients flowing into the skips
  // (skip_grads[0] is the input frame: its gradient is dropped)
  std::vector<TensorT<T>> skip_grads(nb);
  for (int j = nb - 1; j >= 0; --j) {
    auto& blk = dec_[j];
    const auto& dc = cache.dec[j];
    if (blk.fuse2) {
      nn::relu_backward_inplace(dc.fuse2_out, g);
      g = blk.fuse2->backward(dc.fuse2, g);
    }
    nn::relu_backward_inplace(dc.fuse_out, g);
    TensorT<T> g_fused_in = blk.fuse.backward(dc.fuse, g);
    auto [a, b] = nn::split_channels(g_fused_in, dec_[j].up.out_ch);
    TensorT<T> g_up = std::move(a);
    skip_grads[nb - 1 - j] = std::move(b);
    nn::relu_backward_inplace(dc.up_out, g_up);
    g = blk.up.backward(dc.up, g_up);
  }

  // encoder, last block first; g is the gradient on each block's pooled
  // output, skip gradients join at the matching resolutions
  for (int i = nb - 2; i >= 0; --i) {
    auto& blk = enc_[i];
    const auto& bc = cache.enc[i];
    if (i + 2 < nb && skip_grads[i + 2].numel())
      kernels::add_inplace(g.data(), skip_grads[i + 2].data(), g.numel());
    TensorT<T> g_res = blk.pool.backward(bc.pool, g);
    nn::relu_backward_inplace(bc.residual, g_res);
    TensorT<T> g_y1 = blk.c2.backward(bc.c2, g_res);
    nn::relu_backward_inplace(bc.y1, g_y1);
    TensorT<T> g_in = blk.c1.backward(bc.c1, g_y1);
    if (blk.proj) {
      TensorT<T> g_short = blk.proj->backward(bc.proj, g_res);
      kernels::add_inplace(g_in.data(), g_short.data(), g_in.numel());
    } else {
      kernels::add_inplace(g_in.data(), g_res.data(), g_in.numel());
    }
    g = std::move(g_in);
  }

  if (skip_grads[1].numel()) kernels::add_inplace(g.data(), skip_grads[1].data(), g.numel());
  nn::relu_backward_inplace(cache.stem_out, g);
  stem_.backward(cache.stem, g);
}

template <typename T>
std::vector<nn::ParamT<T>*> SegNetT<T>::params() {
  std::vector<nn::ParamT<T>*> out;
  stem_.params(out);
  for (auto& b : enc_) {
    b.c1.params(out);
    b.c2.params(out);
    if (b.proj) b.proj->params(out);
  }
  for (auto& b : dec_) {
    b.up.params(out);
    b.fuse.params(out);
    if (b.fuse2) b.fuse2->params(out);
  }
  head_.params(out);
  return out;
}

template <typename T>
size_t SegNetT<T>::param_count() const {
  size_t n = 0;
  auto& self = const_cast<SegNetT<T>&>(*this);
  for (auto* p : self.params()) n += p->numel();
  return n;
}

template <typename T>
std::vector<int> SegNetT<T>::encoder_output_sizes() const {
  std::vector<int> sizes;
  int s = config_.input_size;
  for (int i = 0; i < config_.blocks(); ++i) {
    s /= 2;
    sizes.push_back(s);
  }
  return sizes;
}

template class SegNetT<float>;
template class SegNetT<double>;

}  // namespace fwnet
