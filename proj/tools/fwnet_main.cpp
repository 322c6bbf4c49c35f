// fwnet command line: dataset synthesis, ingestion, pseudo-labeling,
// training, evaluation, inference and benchmarking over the on-disk layout
// documented in include/fwnet/dataset.hpp.
//
// Exit codes: 0 success, 1 user error (bad arguments/inputs), 2 internal
// error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "fwnet/checkpoint.hpp"
#include "fwnet/dataset.hpp"
#include "fwnet/evalbench.hpp"
#include "fwnet/flo_io.hpp"
#include "fwnet/fwnet.hpp"
#include "fwnet/image.hpp"
#include "fwnet/labelgen.hpp"
#include "fwnet/synthdata.hpp"

namespace fs = std::filesystem;
using namespace fwnet;

namespace {

// every command echoes its fully resolved configuration beside its outputs
void echo_config(CLI::App& app, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream f(out_dir / "run_config.ini");
  f << app.config_to_str(true, true);
}

SegNetConfig seg_config(int width, int in_channels, int input_size = 256) {
  SegNetConfig c;
  c.input_size = input_size;
  c.in_channels = in_channels;
  c.encoder_channels = {width, 2 * width, 4 * width, 8 * width, 8 * width};
  return c;
}

FlowNetConfig flow_config(int width, int in_channels, int input_size = 256) {
  FlowNetConfig c;
  c.input_size = input_size;
  c.in_channels = 2 * in_channels;
  c.channels = {width, 2 * width, 4 * width, 4 * width, 8 * width, 8 * width};
  return c;
}

struct CommonModelFlags {
  int seg_width = 32;   // encoder channels seg_width * [1,2,4,8,8]
  int flow_width = 32;  // flow channels flow_width * [1,2,4,4,8,8]
  int channels = 1;     // frame channels
};

void add_model_flags(CLI::App* cmd, CommonModelFlags& f) {
  cmd->add_option("--seg-width", f.seg_width, "Segmentation base width")->check(CLI::Range(1, 64));
  cmd->add_option("--flow-width", f.flow_width, "Flow-net base width")->check(CLI::Range(1, 64));
  cmd->add_option("--channels", f.channels, "Frame channels (1 grayscale, 3 color)")
      ->check(CLI::IsMember({1, 3}));
}

int run_synth(CLI::App& app, const std::string& out, uint64_t seed, int sequences,
              synth::SynthConfig cfg, bool corrupt, synth::NoiseConfig noise) {
  const fs::path root(out);
  fs::create_directories(root);
  std::vector<std::pair<std::string, int>> counts;
  for (int s = 0; s < sequences; ++s) {
    cfg.seed = seed + static_cast<uint64_t>(s);
    char id[16];
    std::snprintf(id, sizeof(id), "seq%03d", s);
    auto seq = synth::generate_sequence(cfg, id);
    if (corrupt) {
      noise.seed = seed * 1000003ull + static_cast<uint64_t>(s);
      auto raw = synth::corrupt_labels(seq.clean_masks, noise);
      data::write_sequence(root, seq, &raw);
    } else {
      data::write_sequence(root, seq);
    }
    counts.emplace_back(id, cfg.num_frames);
    std::cout << "wrote " << (root / id).string() << " (" << cfg.num_frames << " frames)\n";
  }
  data::write_manifest(root, "synth", app.config_to_str(true, false), counts);
  echo_config(app, root);
  return 0;
}

int run_ingest(CLI::App& app, const std::string& in, const std::string& out, double fps,
               double src_fps, int size, int channels, std::string id) {
  const fs::path src(in);
  if (!fs::exists(src)) throw std::invalid_argument("ingest: no such input: " + in);
  if (!fs::is_directory(src))
    throw std::invalid_argument(
        "ingest: expected a frame directory (video decoding is not built in; extract frames "
        "first): " +
        in);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(src))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::invalid_argument("ingest: no frames found under " + in);

  if (id.empty()) id = src.filename().string();
  const fs::path dst = fs::path(out) / id / "frames";
  fs::create_directories(dst);

  int written = 0;
  for (int n = 0;; ++n) {
    const auto idx = static_cast<size_t>(std::llround(n * src_fps / fps));
    if (idx >= files.size()) break;
    Tensor img = read_png(files[idx]);
    if (channels == 1) img = to_grayscale(img);
    require(channels == img.dim(0) || channels == 1,
            "ingest: cannot produce " + std::to_string(channels) + " channels from " +
                files[idx].string());
    img = resize_bilinear(img, size, size);
    char name[16];
    std::snprintf(name, sizeof(name), "%06d.png", n);
    write_png(dst / name, img);
    ++written;
  }
  if (!written) throw std::invalid_argument("ingest: zero extractable frames from " + in);
  data::write_manifest(fs::path(out), "ingest:" + in, app.config_to_str(true, false),
                       {{id, written}});
  echo_config(app, fs::path(out));
  std::cout << "ingested " << written << " frames into " << dst.string() << "\n";
  return 0;
}

int run_label(CLI::App& app, const std::string& data_dir, label::LabelGenConfig cfg) {
  const fs::path root(data_dir);
  auto dataset = data::load_dataset(root, data::LabelKind::clean, /*require_masks=*/false);
  for (auto& seq : dataset) {
    auto labels = label::generate_raw_labels(seq.frames, cfg);
    const fs::path mask_dir = root / seq.id / "masks_raw";
    fs::create_directories(mask_dir);
    std::vector<std::pair<std::string, std::string>> entries;
    for (size_t i = 0; i < labels.size(); ++i) {
      char name[16];
      std::snprintf(name, sizeof(name), "%06d.png", static_cast<int>(i));
      write_mask_png(mask_dir / name, labels[i]);
      entries.emplace_back((root / seq.id / "frames" / name).string(),
                           (mask_dir / name).string());
    }
    data::write_label_manifest(root / seq.id / "labels_raw.csv", entries,
                               MaskProvenance::raw_pseudo_label);
    std::cout << "labeled " << seq.id << " (" << labels.size() << " frames)\n";
  }
  echo_config(app, root);
  return 0;
}

int run_train(CLI::App& app, const std::string& data_dir, const std::string& out,
              const std::string& labels, TrainConfig cfg) {
  const auto kind = labels == "raw" ? data::LabelKind::raw : data::LabelKind::clean;
  auto dataset = data::load_dataset(data_dir, kind);
  const fs::path out_dir(out);
  fs::create_directories(out_dir);
  echo_config(app, out_dir);

  std::ofstream log(out_dir / "train.log");
  auto result = train(dataset, cfg, &log);
  save_checkpoint(out_dir / "checkpoint.fwnc", result.model,
                  static_cast<uint64_t>(cfg.iterations));
  write_loss_csv((out_dir / "loss.csv").string(), result.history);
  std::cout << "trained " << cfg.iterations << " iterations; final loss "
            << result.history.back().total << "\n"
            << "checkpoint: " << (out_dir / "checkpoint.fwnc").string() << "\n";
  return 0;
}

int run_eval(CLI::App& app, const std::string& ckpt, const std::string& data_dir,
             const std::string& out, const std::string& labels, bool overlays, bool bench,
             int warmup, int reps) {
  auto loaded = load_checkpoint(ckpt);
  const auto kind = labels == "raw" ? data::LabelKind::raw : data::LabelKind::clean;
  auto dataset = data::load_dataset(data_dir, kind);
  const fs::path out_dir(out);
  fs::create_directories(out_dir);
  echo_config(app, out_dir);

  auto report = eval::evaluate(loaded.model, dataset, ckpt, data_dir);
  if (bench) {
    double sd = 0;
    report.fps = eval::benchmark_fps(loaded.model, dataset[0].frames, warmup, reps, &sd);
    report.fps_stddev = sd;
  }
  eval::write_report_json(out_dir / "report.json", report);
  eval::write_dice_csv(out_dir / "dice.csv", report);
  if (overlays) {
    for (const auto& seq : dataset) {
      auto preds = infer_sequence(loaded.model, seq.frames);
      const fs::path ov_dir = out_dir / "overlays" / seq.id;
      fs::create_directories(ov_dir);
      for (size_t i = 0; i < preds.size(); ++i) {
        char name[16];
        std::snprintf(name, sizeof(name), "%06d.png", static_cast<int>(i));
        write_png(ov_dir / name, eval::render_overlay(seq.frames[i], preds[i], &seq.masks[i]));
      }
    }
  }
  std::cout << "mean dice " << report.mean_dice;
  if (bench) std::cout << " fps " << report.fps;
  std::cout << "\nreport: " << (out_dir / "report.json").string() << "\n";
  return 0;
}

int run_infer(CLI::App& app, const std::string& ckpt, const std::string& in,
              const std::string& out, const std::string& flow_out) {
  auto loaded = load_checkpoint(ckpt);
  const fs::path root(in);
  require(fs::exists(root), "infer: no such directory: " + in);

  std::vector<fs::path> seq_dirs;
  if (fs::exists(root / "frames")) {
    seq_dirs.push_back(root);
  } else {
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_directory() && fs::exists(e.path() / "frames")) seq_dirs.push_back(e.path());
    std::sort(seq_dirs.begin(), seq_dirs.end());
  }
  require(!seq_dirs.empty(), "infer: no sequences under " + in);
  echo_config(app, fs::path(out));

  for (const auto& dir : seq_dirs) {
    const std::string id = dir.filename().string();
    auto frames = data::load_frames(dir, id);
    auto masks = infer_sequence(loaded.model, frames);
    const fs::path mask_dir = fs::path(out) / id / "masks_pred";
    fs::create_directories(mask_dir);
    for (size_t i = 0; i < masks.size(); ++i) {
      char name[16];
      std::snprintf(name, sizeof(name), "%06d.png", static_cast<int>(i));
      write_mask_png(mask_dir / name, masks[i]);
    }
    if (!flow_out.empty()) {
      // diagnostic: coarse flow between consecutive frames as .flo dumps
      const fs::path fdir = fs::path(flow_out) / id;
      fs::create_directories(fdir);
      for (size_t i = 0; i + 1 < frames.size(); ++i) {
        auto flow = loaded.model.flownet.forward(
            stack_pair(frames[i].data, frames[i + 1].data));
        char name[16];
        std::snprintf(name, sizeof(name), "%06d.flo", static_cast<int>(i));
        write_flo(fdir / name, flow);
      }
    }
    std::cout << "inferred " << masks.size() << " masks for " << id << "\n";
  }
  return 0;
}

int run_bench(CLI::App& app, const std::string& ckpt, const std::string& data_dir,
              const std::string& out, int warmup, int reps, int max_frames) {
  auto loaded = load_checkpoint(ckpt);
  auto dataset = data::load_dataset(data_dir, data::LabelKind::clean, /*require_masks=*/false);
  std::vector<Frame> frames = dataset[0].frames;
  if (max_frames > 0 && static_cast<int>(frames.size()) > max_frames)
    frames.resize(static_cast<size_t>(max_frames));
  const fs::path out_dir(out);
  fs::create_directories(out_dir);
  echo_config(app, out_dir);

  double sd = 0;
  const double fps = eval::benchmark_fps(loaded.model, frames, warmup, reps, &sd);
  eval::EvalReport report;
  report.model_id = ckpt;
  report.dataset_id = data_dir;
  report.fps = fps;
  report.fps_stddev = sd;
  eval::write_report_json(out_dir / "bench.json", report);
  std::cout << "fps " << fps << " (stddev " << sd << ", " << frames.size() << " frames x "
            << reps << " reps; published reference: " << eval::EvalReport::kReferenceFps
            << " fps on GPU)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fwnet: flow-guided temporal segmentation of curvilinear instruments"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI config file");
  app.allow_config_extras(false);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::string synth_out;
  uint64_t synth_seed = 0;
  int synth_sequences = 1;
  synth::SynthConfig synth_cfg;
  synth::NoiseConfig noise_cfg;
  bool synth_corrupt = false;
  synth_cmd->add_option("--out", synth_out, "Output dataset root")->required();
  synth_cmd->add_option("--seed", synth_seed, "Root seed");
  synth_cmd->add_option("--sequences", synth_sequences, "Number of sequences")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--frames", synth_cfg.num_frames, "Frames per sequence")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--size", synth_cfg.image_size, "Image size (pixels per side)");
  synth_cmd->add_option("--phantoms", synth_cfg.vessel_phantom_count, "Distractor curves");
  synth_cmd->add_option("--noise-sigma", synth_cfg.noise_sigma, "Sensor noise sigma");
  synth_cmd->add_flag("--corrupt", synth_corrupt, "Also write corrupted raw labels");
  synth_cmd->add_option("--dropout", noise_cfg.dropout_fraction, "Label dropout fraction");
  synth_cmd->add_option("--fp-blobs", noise_cfg.false_positive_blobs, "False positive blobs");
  synth_cmd->add_option("--dilate", noise_cfg.dilation_px, "Label dilation radius");
  synth_cmd->add_option("--erode", noise_cfg.erosion_px, "Label erosion radius");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Ingest a frame directory");
  std::string ingest_in, ingest_out, ingest_id;
  double ingest_fps = 8.0, ingest_src_fps = 8.0;
  int ingest_size = 256, ingest_channels = 1;
  ingest_cmd->add_option("--in", ingest_in, "Source frame directory")->required();
  ingest_cmd->add_option("--out", ingest_out, "Output dataset root")->required();
  ingest_cmd->add_option("--fps", ingest_fps, "Target frames per second")
      ->check(CLI::PositiveNumber);
  ingest_cmd->add_option("--src-fps", ingest_src_fps, "Source frames per second")
      ->check(CLI::PositiveNumber);
  ingest_cmd->add_option("--size", ingest_size, "Output size (pixels per side)");
  ingest_cmd->add_option("--channels", ingest_channels, "Output channels")
      ->check(CLI::IsMember({1, 3}));
  ingest_cmd->add_option("--id", ingest_id, "Sequence id (defaults to directory name)");

  // label
  auto* label_cmd = app.add_subcommand("label", "Generate raw pseudo-labels");
  std::string label_data;
  label::LabelGenConfig label_cfg;
  label_cmd->add_option("--data", label_data, "Dataset root")->required();
  label_cmd->add_option("--scales", label_cfg.vesselness.scales, "Vesselness sigmas");
  label_cmd->add_option("--beta", label_cfg.vesselness.beta, "Blobness sensitivity");
  label_cmd->add_option("--window", label_cfg.window, "Adaptive threshold window");
  label_cmd->add_option("--offset", label_cfg.offset, "Adaptive threshold offset");
  label_cmd->add_option("--min-area", label_cfg.min_area, "Minimum component area");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train FW-Net");
  std::string train_data, train_out, train_labels = "raw";
  TrainConfig train_cfg;
  CommonModelFlags train_model;
  train_cmd->add_option("--data", train_data, "Dataset root")->required();
  train_cmd->add_option("--out", train_out, "Run output directory")->required();
  train_cmd->add_option("--labels", train_labels, "Label kind: raw|clean")
      ->check(CLI::IsMember({"raw", "clean"}));
  train_cmd->add_option("--lr", train_cfg.learning_rate, "Learning rate");
  train_cmd->add_option("--momentum", train_cfg.momentum, "SGD momentum");
  train_cmd->add_option("--lambda", train_cfg.lambda, "Warped-frame loss weight");
  train_cmd->add_option("--max-offset", train_cfg.max_pair_offset, "Max pair offset");
  train_cmd->add_option("--batch", train_cfg.batch_size, "Pairs per iteration");
  train_cmd->add_option("--iters", train_cfg.iterations, "Training iterations");
  train_cmd->add_option("--seed", train_cfg.seed, "Root seed");
  train_cmd->add_option("--log-every", train_cfg.log_every, "Log interval");
  add_model_flags(train_cmd, train_model);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_out, eval_labels = "clean";
  bool eval_overlays = false, eval_bench = false;
  int eval_warmup = 2, eval_reps = 3;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "Dataset root with ground truth")->required();
  eval_cmd->add_option("--out", eval_out, "Report output directory")->required();
  eval_cmd->add_option("--labels", eval_labels, "Ground-truth kind: clean|raw")
      ->check(CLI::IsMember({"raw", "clean"}));
  eval_cmd->add_flag("--overlays", eval_overlays, "Write overlay PNGs");
  eval_cmd->add_flag("--bench", eval_bench, "Also benchmark inference FPS");
  eval_cmd->add_option("--warmup", eval_warmup, "Benchmark warmup passes");
  eval_cmd->add_option("--reps", eval_reps, "Benchmark repetitions");

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "Segment sequences");
  std::string infer_ckpt, infer_in, infer_out, infer_flow;
  infer_cmd->add_option("--checkpoint", infer_ckpt, "Checkpoint file")->required();
  infer_cmd->add_option("--in", infer_in, "Dataset root or sequence directory")->required();
  infer_cmd->add_option("--out", infer_out, "Output root")->required();
  infer_cmd->add_option("--flow-out", infer_flow, "Also dump coarse .flo flow files");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Benchmark inference FPS");
  std::string bench_ckpt, bench_data, bench_out;
  int bench_warmup = 3, bench_reps = 5, bench_frames = 16;
  bench_cmd->add_option("--checkpoint", bench_ckpt, "Checkpoint file")->required();
  bench_cmd->add_option("--data", bench_data, "Dataset root providing frames")->required();
  bench_cmd->add_option("--out", bench_out, "Report output directory")->required();
  bench_cmd->add_option("--warmup", bench_warmup, "Warmup passes");
  bench_cmd->add_option("--reps", bench_reps, "Repetitions")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--frames", bench_frames, "Frames per repetition");

  try {
    app.parse(argc, argv);

    if (*synth_cmd) return run_synth(app, synth_out, synth_seed, synth_sequences, synth_cfg,
                                     synth_corrupt, noise_cfg);
    if (*ingest_cmd)
      return run_ingest(app, ingest_in, ingest_out, ingest_fps, ingest_src_fps, ingest_size,
                        ingest_channels, ingest_id);
    if (*label_cmd) return run_label(app, label_data, label_cfg);
    if (*train_cmd) {
      const int size = 256;
      train_cfg.segnet = seg_config(train_model.seg_width, train_model.channels, size);
      train_cfg.flownet = flow_config(train_model.flow_width, train_model.channels, size);
      return run_train(app, train_data, train_out, train_labels, train_cfg);
    }
    if (*eval_cmd)
      return run_eval(app, eval_ckpt, eval_data, eval_out, eval_labels, eval_overlays,
                      eval_bench, eval_warmup, eval_reps);
    if (*infer_cmd) return run_infer(app, infer_ckpt, infer_in, infer_out, infer_flow);
    if (*bench_cmd)
      return run_bench(app, bench_ckpt, bench_data, bench_out, bench_warmup, bench_reps,
                       bench_frames);
    return 1;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
