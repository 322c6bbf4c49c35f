#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fwnet/fwnet.hpp"
#include "fwnet/types.hpp"

// Dice metric, sequence-level evaluation, wall-clock FPS benchmarking and
// overlay rendering.

namespace fwnet::eval {

struct ConfusionCounts {
  size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

ConfusionCounts confusion(const Mask& pred, const Mask& gt);

/// 2*TP / (2*TP + FP + FN); 1.0 when both masks are empty (agreement on
/// absence). Symmetric.
double dice(const Mask& pred, const Mask& gt);

struct EvalReport {
  std::vector<double> per_frame_dice;
  double mean_dice = 0;
  double fps = 0;        // 0 when benchmarking was skipped
  double fps_stddev = 0;
  std::string model_id;
  std::string dataset_id;
  // published reference scores recorded for context (Dice on the original
  // clinical corpus; not comparable to synthetic runs, never a pass/fail
  // bound)
  static constexpr double kReferenceFwNetDice = 0.821;
  static constexpr double kReferenceUNetDice = 0.677;
  static constexpr double kReferenceTcfDice = 0.796;
  static constexpr double kReferenceFps = 15.0;
};

/// Runs per-frame inference over every sequence and scores it against the
/// provided ground-truth masks (frame-averaged Dice).
EvalReport evaluate(const FwNet& model, const std::vector<SequenceSample>& dataset,
                    const std::string& model_id = "", const std::string& dataset_id = "");

/// Mean frames-per-second of single-frame inference after warmup, plus the
/// standard deviation across reps.
double benchmark_fps(const FwNet& model, const std::vector<Frame>& frames, int warmup, int reps,
                     double* stddev = nullptr);

/// RGB visualization: prediction-only pixels red, ground-truth-only pixels
/// blue, agreement green. Without ground truth the whole prediction is
/// tinted red. Empty masks return the frame unchanged.
Tensor render_overlay(const Frame& frame, const Mask& pred, const Mask* gt = nullptr);

void write_report_json(const std::filesystem::path& path, const EvalReport& report);
void write_dice_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace fwnet::eval
