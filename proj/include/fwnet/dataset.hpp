#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fwnet/fwnet.hpp"
#include "fwnet/synthdata.hpp"

// On-disk dataset layout:
//   <root>/<sequence_id>/frames/%06d.png
//   <root>/<sequence_id>/masks_clean/%06d.png   (optional)
//   <root>/<sequence_id>/masks_raw/%06d.png     (optional)
//   <root>/manifest.json                        (config echo, seeds, counts)

namespace fwnet::data {

void write_sequence(const std::filesystem::path& root, const synth::Sequence& seq,
                    const std::vector<Mask>* raw_masks = nullptr);

void write_manifest(const std::filesystem::path& root, const std::string& generator,
                    const std::string& config_echo,
                    const std::vector<std::pair<std::string, int>>& sequence_counts);

enum class LabelKind { clean, raw };

/// Loads every sequence under root. Sequences missing the requested label
/// kind load with empty masks unless require_masks.
std::vector<SequenceSample> load_dataset(const std::filesystem::path& root, LabelKind labels,
                                         bool require_masks = true);

std::vector<Frame> load_frames(const std::filesystem::path& sequence_dir,
                               const std::string& sequence_id);

/// Label manifest CSV (frame path, mask path, provenance).
void write_label_manifest(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, std::string>>& entries,
                          MaskProvenance provenance);

}  // namespace fwnet::data
