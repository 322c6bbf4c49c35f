#include "fwnet/fwnet.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

namespace fwnet {

void TrainConfig::validate() const {
  require(learning_rate > 0, "train: learning_rate must be positive");
  require(momentum >= 0 && momentum < 1, "train: momentum must be in [0,1)");
  require(lambda >= 0, "train: lambda must be >= 0");
  require(max_pair_offset >= 0, "train: max_pair_offset must be >= 0");
  require(batch_size >= 1, "train: batch_size must be >= 1");
  require(iterations >= 1, "train: iterations must be >= 1");
  segnet.validate();
  flownet.validate();
  require(segnet.input_size == flownet.input_size,
          "train: segnet/flownet input sizes must match");
  require(flownet.in_channels == 2 * segnet.in_channels,
          "train: flownet must take the channel-stacked pair");
}

FramePair sample_pair(const SequenceSample& sequence, int max_offset, Rng& rng) {
  require(!sequence.frames.empty(), "sample_pair: empty sequence");
  require(sequence.frames.size() == sequence.masks.size(),
          "sample_pair: sequence has " + std::to_string(sequence.frames.size()) + " frames but " +
              std::to_string(sequence.masks.size()) + " masks");
  const int len = static_cast<int>(sequence.frames.size());
  const int i = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(len)));
  const int max_off = std::min(max_offset, len - 1 - i);
  const int off = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(max_off + 1)));
  FramePair p;
  p.frame_i = &sequence.frames[i];
  p.frame_j = &sequence.frames[i + off];
  p.mask_i = &sequence.masks[i];
  p.mask_j = &sequence.masks[i + off];
  p.offset = off;
  return p;
}

template <typename T>
typename FwNetT<T>::PairForward FwNetT<T>::forward_pair(const TensorT<T>& frame_i,
                                                        const TensorT<T>& frame_j,
                                                        bool with_caches,
                                                        bool with_warp_branch) const {
  PairForward fw;
  fw.seg_i = segnet.forward(frame_i, with_caches ? &fw.seg_cache : nullptr);
  if (!with_warp_branch) return fw;

  fw.has_warp_branch = true;
  const int full = segnet.config().input_size;
  fw.flow_coarse = flownet.forward(stack_pair(frame_i, frame_j),
                                   with_caches ? &fw.flow_cache : nullptr);
  fw.flow_full = resize_flow(fw.flow_coarse, full, full);
  TensorT<T> warped = warp_features(fw.seg_i.features, fw.flow_full);
  TensorT<T> logits_j =
      segnet.head().forward(warped, with_caches ? &fw.head_cache : nullptr);
  fw.seg_j.probabilities = nn::softmax_channels(logits_j);
  fw.seg_j.features = std::move(warped);
  return fw;
}

template <typename T>
void FwNetT<T>::backward_pair(PairForward& fw, const TensorT<T>& grad_logits_i,
                              const TensorT<T>* grad_logits_j) {
  TensorT<T> extra_feature_grad;
  if (grad_logits_j) {
    require(fw.has_warp_branch, "backward_pair: no warp branch in forward");
    TensorT<T> g_warped = segnet.head().backward(fw.head_cache, *grad_logits_j);
    WarpGrads<T> wg = warp_backward(g_warped, fw.seg_i.features, fw.flow_full);
    FlowFieldT<T> g_coarse = resize_flow_backward(
        wg.flow, fw.flow_coarse.height(), fw.flow_coarse.width(), fw.flow_coarse.resolution_scale);
    flownet.backward(fw.flow_cache, g_coarse);
    extra_feature_grad = std::move(wg.source);
  }
  segnet.backward(fw.seg_cache, grad_logits_i,
                  extra_feature_grad.numel() ? &extra_feature_grad : nullptr);
}

template <typename T>
std::vector<nn::ParamT<T>*> FwNetT<T>::params() {
  auto out = segnet.params();
  auto fp = flownet.params();
  out.insert(out.end(), fp.begin(), fp.end());
  return out;
}

template <typename T>
void FwNetT<T>::zero_grads() {
  for (auto* p : params()) p->grad.zero();
}

namespace {

void validate_dataset(const std::vector<SequenceSample>& dataset, const TrainConfig& config) {
  require(!dataset.empty(), "train: dataset is empty");
  for (const auto& seq : dataset) {
    require(!seq.frames.empty(), "train: sequence '" + seq.id + "' has no frames");
    require(seq.frames.size() == seq.masks.size(),
            "train: sequence '" + seq.id + "' is missing masks");
    for (const auto& f : seq.frames)
      require(f.channels() == config.segnet.in_channels &&
                  f.height() == config.segnet.input_size &&
                  f.width() == config.segnet.input_size,
              "train: frame size mismatch in sequence '" + seq.id + "'");
    for (size_t i = 0; i < seq.masks.size(); ++i)
      require(seq.masks[i].height() == config.segnet.input_size &&
                  seq.masks[i].width() == config.segnet.input_size,
              "train: mask size mismatch in sequence '" + seq.id + "'");
  }
}

// Relu maps NaN activations to zero, so exploded weights can still produce a
// finite loss; the parameter scan catches that form of divergence too.
template <typename Params>
void check_finite(const Params& params, int iteration) {
  for (const auto* p : params)
    for (size_t i = 0; i < p->value.numel(); ++i)
      if (!std::isfinite(p->value[i]))
        throw TrainingDiverged(iteration, "train: non-finite parameter '" + p->name +
                                              "' after iteration " + std::to_string(iteration));
}

void log_row(std::ostream* log, const LossRow& row) {
  if (!log) return;
  (*log) << "iter " << row.iteration << " loss_s " << row.loss_s << " loss_w " << row.loss_w
         << " loss " << row.total << "\n";
  log->flush();
}

}  // namespace

TrainResult train(const std::vector<SequenceSample>& dataset, const TrainConfig& config,
                  std::ostream* log, const TrainObserver& observer, int observe_every) {
  config.validate();
  validate_dataset(dataset, config);

  TrainResult result;
  result.model = fwnet_init<float>(config.seed, config.segnet, config.flownet);
  auto& model = result.model;
  auto params = model.params();
  Rng sampler = Rng(config.seed).stream("sampler");

  const int full = config.segnet.input_size;
  const double pixel_norm = static_cast<double>(full) * full;
  const bool warp_branch = config.lambda > 0;

  for (int it = 0; it < config.iterations; ++it) {
    model.zero_grads();
    double batch_ls = 0, batch_lw = 0;
    for (int b = 0; b < config.batch_size; ++b) {
      const auto& seq = dataset[sampler.uniform_int(dataset.size())];
      FramePair pair = sample_pair(seq, config.max_pair_offset, sampler);

      auto fw = model.forward_pair(pair.frame_i->data, pair.frame_j->data, true, warp_branch);
      const double ls = weighted_ce_loss(fw.seg_i.probabilities, *pair.mask_i);
      const double norm_i = balanced_loss_norm(*pair.mask_i) * pixel_norm;
      auto grad_i = weighted_ce_grad_logits(
          fw.seg_i.probabilities, *pair.mask_i,
          static_cast<float>(1.0 / (config.batch_size * norm_i)));

      double lw = 0, norm_j = 1;
      if (warp_branch) {
        lw = weighted_ce_loss(fw.seg_j.probabilities, *pair.mask_j);
        norm_j = balanced_loss_norm(*pair.mask_j) * pixel_norm;
        auto grad_j = weighted_ce_grad_logits(
            fw.seg_j.probabilities, *pair.mask_j,
            static_cast<float>(config.lambda / (config.batch_size * norm_j)));
        model.backward_pair(fw, grad_i, &grad_j);
      } else {
        model.backward_pair(fw, grad_i, nullptr);
      }
      batch_ls += ls / norm_i / config.batch_size;
      batch_lw += lw / norm_j / config.batch_size;
    }

    const double total = batch_ls + config.lambda * batch_lw;
    if (!std::isfinite(total))
      throw TrainingDiverged(it, "train: non-finite loss at iteration " + std::to_string(it));

    for (auto* p : params)
      kernels::sgd_momentum_update(p->value.data(), p->momentum.data(), p->grad.data(),
                                   p->value.numel(), static_cast<float>(config.learning_rate),
                                   static_cast<float>(config.momentum));
    check_finite(params, it);

    result.history.push_back({it, batch_ls, batch_lw, total});
    if (it % config.log_every == 0 || it + 1 == config.iterations)
      log_row(log, result.history.back());
    if (observer && observe_every > 0 && (it + 1) % observe_every == 0 &&
        !observer(model, it + 1))
      break;
  }
  return result;
}

TrainResult train_segnet_only(const std::vector<SequenceSample>& dataset,
                              const TrainConfig& config, std::ostream* log) {
  config.validate();
  validate_dataset(dataset, config);

  TrainResult result;
  result.model = fwnet_init<float>(config.seed, config.segnet, config.flownet);
  auto& segnet = result.model.segnet;
  auto params = segnet.params();
  Rng sampler = Rng(config.seed).stream("sampler");
  const double pixel_norm =
      static_cast<double>(config.segnet.input_size) * config.segnet.input_size;

  for (int it = 0; it < config.iterations; ++it) {
    for (auto* p : params) p->grad.zero();
    double batch_ls = 0;
    for (int b = 0; b < config.batch_size; ++b) {
      const auto& seq = dataset[sampler.uniform_int(dataset.size())];
      FramePair pair = sample_pair(seq, config.max_pair_offset, sampler);

      typename SegNetT<float>::Cache cache;
      auto out = segnet.forward(pair.frame_i->data, &cache);
      const double ls = weighted_ce_loss(out.probabilities, *pair.mask_i);
      const double norm = balanced_loss_norm(*pair.mask_i) * pixel_norm;
      auto grad = weighted_ce_grad_logits(out.probabilities, *pair.mask_i,
                                          static_cast<float>(1.0 / (config.batch_size * norm)));
      segnet.backward(cache, grad);
      batch_ls += ls / norm / config.batch_size;
    }
    if (!std::isfinite(batch_ls))
      throw TrainingDiverged(it, "train: non-finite loss at iteration " + std::to_string(it));
    for (auto* p : params)
      kernels::sgd_momentum_update(p->value.data(), p->momentum.data(), p->grad.data(),
                                   p->value.numel(), static_cast<float>(config.learning_rate),
                                   static_cast<float>(config.momentum));
    check_finite(params, it);
    result.history.push_back({it, batch_ls, 0.0, batch_ls});
    if (it % config.log_every == 0 || it + 1 == config.iterations)
      log_row(log, result.history.back());
  }
  return result;
}

SegOutput infer_frame(const FwNet& model, const Frame& frame) {
  return model.segnet.forward(frame.data, nullptr);
}

std::vector<Mask> infer_sequence(const FwNet& model, const std::vector<Frame>& frames) {
  std::vector<Mask> out;
  out.reserve(frames.size());
  for (const auto& frame : frames) {
    auto seg = model.segnet.forward(frame.data, nullptr);
    const int h = seg.probabilities.dim(1), w = seg.probabilities.dim(2);
    const size_t plane = static_cast<size_t>(h) * w;
    Mask m;
    m.provenance = MaskProvenance::predicted;
    m.data = TensorT<uint8_t>({h, w});
    for (size_t i = 0; i < plane; ++i)
      m.data[i] = seg.probabilities[plane + i] > seg.probabilities[i] ? 1 : 0;
    out.push_back(std::move(m));
  }
  return out;
}

void write_loss_csv(const std::string& path, const std::vector<LossRow>& history) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_loss_csv: cannot open " + path);
  f << "iteration,loss_s,loss_w,loss\n";
  for (const auto& r : history)
    f << r.iteration << ',' << r.loss_s << ',' << r.loss_w << ',' << r.total << "\n";
}

template class FwNetT<float>;
template class FwNetT<double>;

}  // namespace fwnet
