#include "fwnet/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "fwnet/image.hpp"

namespace fwnet::data {

namespace fs = std::filesystem;

namespace {

std::string frame_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d.png", index);
  return buf;
}

std::vector<fs::path> sorted_pngs(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::exists(dir)) return files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

void write_sequence(const fs::path& root, const synth::Sequence& seq,
                    const std::vector<Mask>* raw_masks) {
  const fs::path base = root / seq.id;
  fs::create_directories(base / "frames");
  fs::create_directories(base / "masks_clean");
  if (raw_masks) fs::create_directories(base / "masks_raw");
  for (size_t i = 0; i < seq.frames.size(); ++i) {
    const auto name = frame_name(static_cast<int>(i));
    write_png(base / "frames" / name, seq.frames[i].data);
    write_mask_png(base / "masks_clean" / name, seq.clean_masks[i]);
    if (raw_masks) {
      require(raw_masks->size() == seq.frames.size(), "write_sequence: raw mask count mismatch");
      write_mask_png(base / "masks_raw" / name, (*raw_masks)[i]);
    }
  }
}

void write_manifest(const fs::path& root, const std::string& generator,
                    const std::string& config_echo,
                    const std::vector<std::pair<std::string, int>>& sequence_counts) {
  nlohmann::json seqs = nlohmann::json::array();
  for (const auto& [id, count] : sequence_counts)
    seqs.push_back({{"id", id}, {"frames", count}});
  nlohmann::json j{{"generator", generator}, {"config", config_echo}, {"sequences", seqs}};
  std::ofstream f(root / "manifest.json");
  if (!f) throw std::runtime_error("write_manifest: cannot open manifest in " + root.string());
  f << j.dump(2) << "\n";
}

std::vector<Frame> load_frames(const fs::path& sequence_dir, const std::string& sequence_id) {
  std::vector<Frame> frames;
  int index = 0;
  for (const auto& p : sorted_pngs(sequence_dir / "frames")) {
    Frame f;
    f.data = read_png(p);
    f.sequence_id = sequence_id;
    f.index = index++;
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<SequenceSample> load_dataset(const fs::path& root, LabelKind labels,
                                         bool require_masks) {
  require(fs::exists(root), "load_dataset: no such directory: " + root.string());
  std::vector<fs::path> seq_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "frames")) seq_dirs.push_back(e.path());
  std::sort(seq_dirs.begin(), seq_dirs.end());
  require(!seq_dirs.empty(), "load_dataset: no sequences under " + root.string());

  const char* mask_dir = labels == LabelKind::clean ? "masks_clean" : "masks_raw";
  const auto provenance = labels == LabelKind::clean ? MaskProvenance::clean_synthetic
                                                     : MaskProvenance::raw_pseudo_label;
  std::vector<SequenceSample> out;
  for (const auto& dir : seq_dirs) {
    SequenceSample s;
    s.id = dir.filename().string();
    s.frames = load_frames(dir, s.id);
    const auto masks = sorted_pngs(dir / mask_dir);
    if (require_masks)
      require(masks.size() == s.frames.size(), "load_dataset: sequence '" + s.id + "' has " +
                                                   std::to_string(s.frames.size()) +
                                                   " frames but " + std::to_string(masks.size()) +
                                                   " " + mask_dir + " masks");
    for (const auto& m : masks) s.masks.push_back(read_mask_png(m, provenance));
    out.push_back(std::move(s));
  }
  return out;
}

void write_label_manifest(const fs::path& path,
                          const std::vector<std::pair<std::string, std::string>>& entries,
                          MaskProvenance provenance) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_label_manifest: cannot open " + path.string());
  f << "frame,mask,provenance\n";
  for (const auto& [frame, mask] : entries)
    f << frame << ',' << mask << ',' << provenance_name(provenance) << "\n";
}

}  // namespace fwnet::data
