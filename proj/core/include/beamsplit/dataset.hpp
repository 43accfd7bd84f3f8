#pragma once

#include <optional>
#include <string>

#include "beamsplit/synth.hpp"

namespace beamsplit {

/// On-disk dataset layout:
///   manifest.json            generating spec (echo) and counts
///   poses.json               camera records (flash and holdout flags)
///   images/<id>.pfm (+.png)  raw-linear captures with previews
///   gt/<id>_*.pfm            ground-truth layers, depths, mask
///   points_flash.ply, points_noflash.ply, point_labels.json
void save_dataset(const std::string& dir, const SynthDataset& dataset);

struct LoadedDataset {
  SynthSpec spec;
  CaptureSet captures;
  std::vector<OracleMaps> gt;  // empty when the gt directory is absent
  SfMPoints flash_points;
  SfMPoints noflash_points;
  std::vector<PointLabel> flash_labels;
  std::vector<PointLabel> noflash_labels;

  bool has_gt() const { return !gt.empty(); }
  bool has_points() const { return flash_points.size() > 0; }
};

/// Loads poses and images (required); ground truth and point clouds are
/// optional and left empty when missing.
LoadedDataset load_dataset(const std::string& dir);

}  // namespace beamsplit
