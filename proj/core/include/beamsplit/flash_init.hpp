#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "beamsplit/scene_model.hpp"

namespace beamsplit {

/// Sparse SfM-like points with raw-linear mean colors in [0,1].
struct SfMPoints {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3d> colors;
  bool flash_source = false;

  std::size_t size() const { return positions.size(); }
};

enum class PointLabel { kTransmitted, kReflected };

/// Classified points. Transmitted points carry both color variants; the
/// flash_colors entry of a reflected point is unused (zero).
struct LabeledPoints {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3d> colors;        // no-flash domain
  std::vector<Eigen::Vector3d> flash_colors;  // flash domain (transmitted)
  std::vector<PointLabel> labels;

  std::size_t size() const { return positions.size(); }
  std::size_t count(PointLabel l) const;
};

struct SimilarityTransform {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return scale * (rotation * p) + translation;
  }
  static SimilarityTransform identity() { return {}; }
};

/// Umeyama similarity fit between camera-center correspondences formed by
/// nearest-neighbor matching of the two center sets (each flash center to
/// its nearest no-flash center). Requires >= 3 centers per side; throws
/// alignment_unreliable_error on degenerate (collinear) configurations, in
/// which case the caller may force the identity transform.
SimilarityTransform align_clouds(
    const std::vector<Eigen::Vector3d>& flash_centers,
    const std::vector<Eigen::Vector3d>& noflash_centers);

/// RMS distance between matched nearest-neighbor center pairs after applying
/// `transform` to the flash centers.
double alignment_residual(const std::vector<Eigen::Vector3d>& flash_centers,
                          const std::vector<Eigen::Vector3d>& noflash_centers,
                          const SimilarityTransform& transform);

struct ClassifyConfig {
  /// Match radius; <= 0 selects 2x the median nearest-neighbor spacing of
  /// the no-flash cloud.
  double radius = 0.0;
  /// Luminance ratio at or above which a matched point is transmitted.
  double ratio = 1.25;
};

/// Rec.601 luminance of a raw-linear color.
double luminance(const Eigen::Vector3d& rgb);

/// Flash-cue classification. For each flash point, the nearest no-flash
/// point within the radius decides: luminance ratio >= tau -> transmitted
/// (both colors kept), below -> reflected. Flash points with no neighbor are
/// transmitted (flash-visible content is transmission); no-flash points with
/// no flash neighbor are reflected. Deterministic and permutation-invariant:
/// inputs are canonically sorted by position first, ties broken by the
/// smallest sorted index.
LabeledPoints classify_points(const SfMPoints& flash_pts_aligned,
                              const SfMPoints& noflash_pts,
                              const ClassifyConfig& config = {});

struct InitConfig {
  SceneMode mode = SceneMode::kFull;
  double hard_linear_c = 1.0;  // used iff mode == kHardLinear
  double gamma_exponent = 0.22;
  int sh_degree = 1;       // color clouds
  int beta_sh_degree = 0;  // reflective-fraction cloud
  double opacity_seed = 0.1;
  double beta_seed = 0.5;  // activated beta of a fully opaque seed splat
  int fallback_count = 256;
  std::uint64_t fallback_seed = 0;
};

struct InitReport {
  bool transmitted_fallback = false;
  bool reflected_fallback = false;
};

/// Seeds the scene: T_F at transmitted positions with flash colors, T_N at
/// the same positions with no-flash colors, beta at transmitted positions
/// with a DC mapping to activated beta ~= beta_seed, R at reflected
/// positions. Cloud colors are stored tone-mapped (the model renders in the
/// tone-mapped domain). Initial log-scales come from the mean 3-nearest-
/// neighbor distance; opacity starts at logit(opacity_seed). An empty label
/// class falls back to random seeding in the scene bounding box with a
/// warning.
SceneModel init_scene(const LabeledPoints& labels, const InitConfig& config,
                      InitReport* report = nullptr);

/// Flash-cue-free seeding for the flashless ablation: all three clouds are
/// seeded from the same unlabeled point set.
SceneModel init_scene_unlabeled(const SfMPoints& points,
                                const InitConfig& config);

}  // namespace beamsplit
