#pragma once

#include "beamsplit/camera.hpp"
#include "beamsplit/image.hpp"
#include "beamsplit/rasterizer.hpp"
#include "beamsplit/scene_model.hpp"

namespace beamsplit {

/// Weights of the four objective terms; data terms dominant by default,
/// regularizers gentle. All exposed in the run config.
struct LossWeights {
  double l1 = 0.8;
  double dssim = 0.2;
  double linearity = 0.05;
  double depth = 0.01;
};

struct LossReport {
  double l1 = 0;
  double dssim = 0;
  double linearity = 0;
  double depth = 0;
  double total = 0;
};

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Guide-difference scale of the edge-aware depth smoothness term.
inline constexpr double kDepthGuideTau = 0.1;
/// Variance floor below which the Pearson loss degenerates to 0.
inline constexpr double kPearsonVarEps = 1e-8;

/// Mean absolute difference.
double l1_loss(const Image& a, const Image& b);
double l1_loss_with_grad(const Image& a, const Image& b, Image* grad_a);

/// (1 - SSIM)/2 with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, evaluated on fully interior windows. Images
/// smaller than the window fall back to the largest odd window that fits.
double dssim_loss(const Image& a, const Image& b,
                  const SsimParams& params = {});
double dssim_loss_with_grad(const Image& a, const Image& b,
                            const SsimParams& params, Image* grad_a);

/// Negative Pearson correlation of the two maps over all pixels and channels
/// jointly; 0 when either variance falls below kPearsonVarEps. Invariant to
/// positive affine maps of either argument.
double pearson_linearity_loss(const Image& t_n, const Image& t_f);
double pearson_linearity_loss_with_grad(const Image& t_n, const Image& t_f,
                                        Image* grad_tn, Image* grad_tf);

/// Edge-aware smoothness: mean over pixels of
/// |dx d| exp(-|dx g|/tau) + |dy d| exp(-|dy g|/tau), forward differences.
double depth_smoothness_loss(const Image& depth, const Image& guide);
double depth_smoothness_loss_with_grad(const Image& depth, const Image& guide,
                                       Image* grad_depth);

struct SceneGradients {
  ParamGradients t_f;  // empty unless the scene carries a T_F cloud
  ParamGradients t_n;
  ParamGradients r;
  ParamGradients beta;
};

struct TotalLossResult {
  LossReport report;
  SceneGradients grads;       // populated when with_gradients
  CompositeRender composite;  // forward maps of the evaluated view
};

/// Full objective at one view: L1 and DSSIM between gamma(I_raw) and the
/// composite, the Pearson linearity term on the 2D pseudo-pair at the same
/// pose, and depth smoothness on the reflection depth guided by the captured
/// tone-mapped image. total = w.l1*L1 + w.dssim*DSSIM + w.linearity*Lin +
/// w.depth*Depth. Gradients flow to every cloud parameter when requested.
TotalLossResult total_loss(const SceneModel& scene, const CameraView& view,
                           const LossWeights& weights,
                           const SsimParams& ssim_params = {},
                           bool with_gradients = true);

}  // namespace beamsplit
