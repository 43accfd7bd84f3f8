#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "beamsplit/camera.hpp"
#include "beamsplit/flash_init.hpp"
#include "beamsplit/image.hpp"

namespace beamsplit {

/// Finite textured rectangle: center plus orthogonal half-extent vectors,
/// texture bilinearly sampled over the extent.
struct TexturedPlane {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis_u = Eigen::Vector3d::UnitX();
  Eigen::Vector3d axis_v = Eigen::Vector3d::UnitY();
  Image texture;

  Eigen::Vector3d normal() const {
    return axis_u.cross(axis_v).normalized();
  }
};

/// Ground-truth world: planar transmitted scene behind glass, planar virtual
/// reflected scene (law of reflection pre-applied), a glass plane carrying
/// the reflective-fraction texture, flash gain alpha, and the residual
/// flash-on-reflection gain beta_f (0 by default, per the approximation that
/// flash barely brightens the reflection).
struct SyntheticScene {
  TexturedPlane transmitted;
  TexturedPlane reflected_virtual;
  TexturedPlane glass;  // 1-channel beta texture in [0,1]
  double alpha = 0.5;
  double beta_f = 0.0;
  bool flash_falloff = false;
  double falloff_ref = 2.8;  // distance at which the flash gain is 1+alpha
  Eigen::Vector3d background{0.02, 0.02, 0.02};
};

/// Per-view oracle output. Layer identity (checked by tests):
/// image = gain * t_n + (beta + flash * beta_f) * r_layer with
/// gain = flash ? 1 + alpha [* falloff] : 1.
struct OracleMaps {
  Image image;     // raw-linear capture in [0,1]
  Image t_n;       // transmitted layer without flash
  Image beta_r;    // beta * R layer
  Image r_layer;   // R alone
  Image beta_map;  // beta alone, 1 channel
  Image depth_t;   // camera-space depth of the transmitted hit (0 on miss)
  Image depth_r;   // camera-space depth of the virtual reflected hit
  Image mask;      // bit 1: transmitted hit, bit 2: reflection visible
};

struct SynthSpec {
  std::uint64_t seed = 0;
  int width = 128;
  int height = 96;
  int n_flash = 6;
  int n_noflash = 6;
  int n_holdout = 2;
  double alpha = 0.5;
  double beta_f = 0.0;
  bool flash_falloff = false;
  double fov_deg = 45.0;
  double arc_radius = 2.8;
  double arc_span_deg = 40.0;
  double jitter = 0.03;
  int points_per_plane = 1200;
  double point_color_noise = 0.0;

  bool valid() const {
    return width > 0 && height > 0 && n_flash >= 1 && n_noflash >= 1 &&
           n_holdout >= 0 && alpha > 0 && beta_f >= 0 && arc_radius > 0 &&
           arc_span_deg > 0 && points_per_plane >= 1;
  }
};

std::string synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const std::string& text);
SynthSpec load_synth_spec(const std::string& path);

/// Procedural world for a spec: seeded textures (checkerboards, gradients,
/// noise blobs), bounded so that every emitted image stays within [0,1].
SyntheticScene build_scene(const SynthSpec& spec);

/// One-ray-per-pixel reference renderer, fully independent of the Gaussian
/// rasterizer. Rays that miss everything see the background with beta = 0.
OracleMaps render_oracle(const SyntheticScene& scene, const CameraView& view,
                         bool flash);

struct SynthDataset {
  SynthSpec spec;
  SyntheticScene scene;
  CaptureSet captures;         // train views plus flagged holdout views
  std::vector<OracleMaps> gt;  // parallel to captures.views
  SfMPoints flash_points;
  SfMPoints noflash_points;
  std::vector<PointLabel> flash_labels;
  std::vector<PointLabel> noflash_labels;
};

/// Unpaired capture set along a camera arc (flash/no-flash interleaved so the
/// pools cover similar perspectives), ground-truth bundles, and SfM-like
/// labeled point clouds sampled on both planes.
SynthDataset emit_dataset(const SynthSpec& spec);

/// Eq-style paired difference: elementwise max(i_f - i_n, 0).
Image paired_subtract(const Image& i_f, const Image& i_n);

}  // namespace beamsplit
