#pragma once

// Central finite-difference oracle over every scene parameter. Used by the
// rasterizer/composite unit tests and by the acceptance gradient sweep; the
// oracle only calls the forward path.

#include <cstddef>
#include <vector>

#include "beamsplit/losses.hpp"
#include "beamsplit/scene_model.hpp"

namespace beamsplit::testing {

enum class ParamKind { kPosition, kRotation, kLogScale, kOpacity, kSh };

struct ParamRef {
  int cloud = 0;  // 0: t_f, 1: t_n, 2: r, 3: beta
  ParamKind kind = ParamKind::kPosition;
  std::size_t index = 0;
  int comp = 0;
};

inline GaussianCloud* cloud_of(SceneModel& scene, int cloud) {
  switch (cloud) {
    case 0: return scene.uses_tf_cloud() ? &scene.t_f : nullptr;
    case 1: return &scene.t_n;
    case 2: return &scene.r;
    case 3: return &scene.beta;
  }
  return nullptr;
}

inline const ParamGradients* grads_of(const SceneGradients& g, int cloud) {
  switch (cloud) {
    case 0: return &g.t_f;
    case 1: return &g.t_n;
    case 2: return &g.r;
    case 3: return &g.beta;
  }
  return nullptr;
}

inline std::vector<ParamRef> enumerate_params(SceneModel& scene) {
  std::vector<ParamRef> out;
  for (int c = 0; c < 4; ++c) {
    GaussianCloud* cloud = cloud_of(scene, c);
    if (!cloud) continue;
    for (std::size_t i = 0; i < cloud->size(); ++i) {
      for (int k = 0; k < 3; ++k)
        out.push_back({c, ParamKind::kPosition, i, k});
      for (int k = 0; k < 4; ++k)
        out.push_back({c, ParamKind::kRotation, i, k});
      for (int k = 0; k < 3; ++k)
        out.push_back({c, ParamKind::kLogScale, i, k});
      out.push_back({c, ParamKind::kOpacity, i, 0});
      const int n_sh = static_cast<int>(cloud->gaussians[i].sh.size());
      for (int k = 0; k < n_sh; ++k) out.push_back({c, ParamKind::kSh, i, k});
    }
  }
  return out;
}

inline double& param_slot(SceneModel& scene, const ParamRef& ref) {
  GaussianCloud& cloud = *cloud_of(scene, ref.cloud);
  Gaussian3D& g = cloud.gaussians[ref.index];
  switch (ref.kind) {
    case ParamKind::kPosition: return g.position[ref.comp];
    case ParamKind::kRotation: return g.rotation[ref.comp];
    case ParamKind::kLogScale: return g.log_scale[ref.comp];
    case ParamKind::kOpacity: return g.opacity_logit;
    case ParamKind::kSh: return g.sh.coeffs[ref.comp];
  }
  return g.opacity_logit;
}

inline double analytic_entry(const SceneGradients& grads, const ParamRef& ref) {
  const ParamGradients& g = *grads_of(grads, ref.cloud);
  switch (ref.kind) {
    case ParamKind::kPosition: return g.position[ref.index][ref.comp];
    case ParamKind::kRotation: return g.rotation[ref.index][ref.comp];
    case ParamKind::kLogScale: return g.log_scale[ref.index][ref.comp];
    case ParamKind::kOpacity: return g.opacity_logit[ref.index];
    case ParamKind::kSh: return g.sh[ref.index][ref.comp];
  }
  return 0.0;
}

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t passed = 0;
  double worst_rel = 0.0;

  double pass_rate() const {
    return checked == 0 ? 1.0 : static_cast<double>(passed) / checked;
  }
};

/// Compares analytic total_loss gradients against central finite differences
/// for every parameter of the scene at one view.
inline GradCheckResult gradcheck_total_loss(SceneModel& scene,
                                            const CameraView& view,
                                            const LossWeights& weights,
                                            const SsimParams& ssim,
                                            double step = 1e-4,
                                            double rel_tol = 1e-3,
                                            double abs_floor = 1e-6) {
  const TotalLossResult analytic = total_loss(scene, view, weights, ssim, true);
  GradCheckResult result;
  for (const ParamRef& ref : enumerate_params(scene)) {
    double& slot = param_slot(scene, ref);
    const double saved = slot;
    slot = saved + step;
    const double f_plus =
        total_loss(scene, view, weights, ssim, false).report.total;
    slot = saved - step;
    const double f_minus =
        total_loss(scene, view, weights, ssim, false).report.total;
    slot = saved;

    const double fd = (f_plus - f_minus) / (2.0 * step);
    const double an = analytic_entry(analytic.grads, ref);
    const double err = std::abs(fd - an);
    const double scale = std::max(std::abs(fd), std::abs(an));
    const bool ok = err <= std::max(abs_floor, rel_tol * scale);
    ++result.checked;
    if (ok) ++result.passed;
    if (scale > abs_floor) {
      result.worst_rel = std::max(result.worst_rel, err / scale);
    }
  }
  return result;
}

}  // namespace beamsplit::testing
