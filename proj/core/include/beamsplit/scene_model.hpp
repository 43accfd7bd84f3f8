#pragma once

#include <optional>
#include <string>

#include "beamsplit/camera.hpp"
#include "beamsplit/gaussian.hpp"
#include "beamsplit/rasterizer.hpp"
#include "beamsplit/tonemap.hpp"

namespace beamsplit {

/// Which clouds a scene carries and how the flash transmission is produced.
///  kFull:       four independent clouds; T_F rendered from its own cloud.
///  kFlashless:  three clouds (transmission, reflection, beta); every view
///               uses the single transmission cloud and no linearity term.
///  kHardLinear: three clouds; T_F is derived as c * T_N in raw-linear space,
///               which in the tone-mapped domain is the constant scale c^e.
enum class SceneMode { kFull, kFlashless, kHardLinear };

/// The optimized unknown: transmission-with-flash, transmission-without-
/// flash, reflection, and the scalar reflective-fraction cloud, plus the
/// tone-curve configuration. Clouds share no parameters.
struct SceneModel {
  GaussianCloud t_f;   // 3 channels; unused in kFlashless / kHardLinear
  GaussianCloud t_n;   // 3 channels
  GaussianCloud r;     // 3 channels
  GaussianCloud beta;  // 1 channel
  double gamma_exponent = 0.22;
  std::optional<double> hard_linear;  // c, set iff mode == kHardLinear
  SceneMode mode = SceneMode::kFull;

  const GaussianCloud& transmission_for(bool flash) const {
    return (mode == SceneMode::kFull && flash) ? t_f : t_n;
  }
  GaussianCloud& transmission_for(bool flash) {
    return (mode == SceneMode::kFull && flash) ? t_f : t_n;
  }
  bool uses_tf_cloud() const { return mode == SceneMode::kFull; }
  bool valid() const;
};

/// One composite forward pass with everything the backward pass needs.
struct CompositeRender {
  Image composite;     // gamma(gamma^-1(T) + beta * gamma^-1(R)), in [0,1]
  Image transmission;  // T, tone-mapped domain
  Image reflection;    // R, tone-mapped domain
  Image beta_map;      // activated beta, in [0,1)
  Image depth_t;
  Image depth_r;

  // Raw-domain intermediates kept for the backward chain.
  Image t_raw, r_raw, u_raw, beta_pre;
  RenderTarget rt_t;  // render of the stored transmission cloud
  RenderTarget rt_r;
  RenderTarget rt_beta;
  bool flash = false;
  double gamma_exponent = 0.22;
  // Tone-domain scale applied to rt_t's color to obtain T (c^e in
  // hard-linear flash views, otherwise 1).
  double derived_scale = 1.0;
};

/// Color gradients routed back to the three underlying renders.
struct CompositeColorGrads {
  Image d_t;     // w.r.t. rt_t.color
  Image d_r;     // w.r.t. rt_r.color
  Image d_beta;  // w.r.t. rt_beta.color
};

/// Renders the flash or no-flash composite of one view:
/// composite = gamma(gamma^-1(T) + beta_map * gamma^-1(Rmap)), clamped to
/// [0,1] with a straight-through gradient. The beta map is the blended
/// 1-channel render squashed by x/(1+x).
CompositeRender render_composite(const SceneModel& scene,
                                 const CameraView& view);

/// Chain rule of the composite expression: maps d(loss)/d(composite) to
/// gradients w.r.t. the three render color maps.
CompositeColorGrads composite_backward(const CompositeRender& cr,
                                       const Image& dL_dcomposite);

/// The 2D pseudo-pair at one pose: both transmission clouds rendered at the
/// identical view, as (T_F image, T_N image) in the tone-mapped domain. In
/// hard-linear mode the flash member is derived from T_N; in flashless mode
/// both members are the single transmission render.
std::pair<Image, Image> render_pseudo_pair(const SceneModel& scene,
                                           const CameraView& view);

/// Smooth clamp used for the beta map and its derivative.
inline double beta_activation(double b) { return b / (1.0 + b); }
inline double beta_activation_grad(double b) {
  const double d = 1.0 + b;
  return 1.0 / (d * d);
}

/// Checkpoint: one binary PLY per cloud plus manifest.json with
/// {gamma_exponent, hard_linear, sh_degree, iteration}.
void save_checkpoint(const std::string& dir, const SceneModel& scene,
                     int iteration);
SceneModel load_checkpoint(const std::string& dir, int* iteration = nullptr);

}  // namespace beamsplit
