#include "fwnet/evalbench.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>

#include "fwnet/image.hpp"

namespace fwnet::eval {

ConfusionCounts confusion(const Mask& pred, const Mask& gt) {
  require(pred.data.shape() == gt.data.shape(),
          "confusion: mask shapes differ (" + pred.data.shape_str() + " vs " +
              gt.data.shape_str() + ")");
  ConfusionCounts c;
  for (size_t i = 0; i < pred.data.numel(); ++i) {
    const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
    if (p && g)
      ++c.tp;
    else if (p)
      ++c.fp;
    else if (g)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

double dice(const Mask& pred, const Mask& gt) {
  const auto c = confusion(pred, gt);
  const size_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;  // agreement on absence
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

EvalReport evaluate(const FwNet& model, const std::vector<SequenceSample>& dataset,
                    const std::string& model_id, const std::string& dataset_id) {
  require(!dataset.empty(), "evaluate: empty dataset");
  EvalReport report;
  report.model_id = model_id;
  report.dataset_id = dataset_id;
  for (const auto& seq : dataset) {
    require(seq.frames.size() == seq.masks.size(),
            "evaluate: sequence '" + seq.id + "' is missing ground-truth masks");
    auto preds = infer_sequence(model, seq.frames);
    for (size_t i = 0; i < preds.size(); ++i)
      report.per_frame_dice.push_back(dice(preds[i], seq.masks[i]));
  }
  double sum = 0;
  for (double d : report.per_frame_dice) sum += d;
  report.mean_dice = report.per_frame_dice.empty()
                         ? 0
                         : sum / static_cast<double>(report.per_frame_dice.size());
  return report;
}

double benchmark_fps(const FwNet& model, const std::vector<Frame>& frames, int warmup, int reps,
                     double* stddev) {
  require(!frames.empty(), "benchmark_fps: no frames");
  require(reps >= 1, "benchmark_fps: reps must be >= 1");
  for (int i = 0; i < warmup; ++i) infer_frame(model, frames[i % frames.size()]);

  std::vector<double> fps(reps);
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& f : frames) infer_frame(model, f);
    const auto t1 = std::chrono::steady_clock::now();
    const double sec = std::chrono::duration<double>(t1 - t0).count();
    fps[r] = static_cast<double>(frames.size()) / std::max(sec, 1e-9);
  }
  double mean = 0;
  for (double v : fps) mean += v;
  mean /= reps;
  if (stddev) {
    double var = 0;
    for (double v : fps) var += (v - mean) * (v - mean);
    *stddev = reps > 1 ? std::sqrt(var / (reps - 1)) : 0.0;
  }
  return mean;
}

Tensor render_overlay(const Frame& frame, const Mask& pred, const Mask* gt) {
  require(frame.height() == pred.height() && frame.width() == pred.width(),
          "render_overlay: frame/mask shape mismatch");
  if (gt)
    require(gt->height() == pred.height() && gt->width() == pred.width(),
            "render_overlay: ground-truth shape mismatch");
  const int h = frame.height(), w = frame.width();
  Tensor gray = to_grayscale(frame.data);
  Tensor out({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float v = gray(0, y, x);
      const size_t i = static_cast<size_t>(y) * w + x;
      const bool p = pred.data[i] != 0;
      const bool g = gt && gt->data[i] != 0;
      float r = v, gr = v, b = v;
      if (p && g) {  // agreement
        gr = 0.6f * gr + 0.4f;
      } else if (p) {  // prediction only
        r = 0.6f * r + 0.4f;
      } else if (g) {  // ground truth only
        b = 0.6f * b + 0.4f;
      }
      out(0, y, x) = r;
      out(1, y, x) = gr;
      out(2, y, x) = b;
    }
  return out;
}

void write_report_json(const std::filesystem::path& path, const EvalReport& report) {
  nlohmann::json j{
      {"model_id", report.model_id},
      {"dataset_id", report.dataset_id},
      {"mean_dice", report.mean_dice},
      {"frames", report.per_frame_dice.size()},
      {"per_frame_dice", report.per_frame_dice},
      {"fps", report.fps},
      {"fps_stddev", report.fps_stddev},
      {"reference_scores",
       {{"fw_net_dice", EvalReport::kReferenceFwNetDice},
        {"u_net_dice", EvalReport::kReferenceUNetDice},
        {"tcf_dice", EvalReport::kReferenceTcfDice},
        {"fps_gpu", EvalReport::kReferenceFps},
        {"note", "published results on the original clinical corpus, recorded for context"}}}};
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_report_json: cannot open " + path.string());
  f << j.dump(2) << "\n";
}

void write_dice_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_dice_csv: cannot open " + path.string());
  f << "frame,dice\n";
  for (size_t i = 0; i < report.per_frame_dice.size(); ++i)
    f << i << ',' << report.per_frame_dice[i] << "\n";
}

}  // namespace fwnet::eval
