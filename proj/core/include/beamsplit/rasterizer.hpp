#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "beamsplit/camera.hpp"
#include "beamsplit/gaussian.hpp"
#include "beamsplit/image.hpp"

namespace beamsplit {

// Blending constants. A contribution is skipped below kAlphaMin; alpha is
// clipped at kAlphaMax before compositing so the transmittance product and
// its gradient stay finite; a pixel stops accepting contributions once its
// transmittance reaches kTransmittanceStop, which equals the transmittance
// left behind one clipped-opaque splat, so such a splat fully occludes
// whatever lies behind it.
inline constexpr double kAlphaMin = 1.0 / 255.0;
inline constexpr double kAlphaMax = 0.999;
inline constexpr double kTransmittanceStop = 1.0 - kAlphaMax;

// Splats contribute only within this many standard deviations of their 2D
// mean.
inline constexpr double kSplatCutoffSigma = 3.0;

/// Per-Gaussian gradients, shape-congruent with the source cloud. The
/// screen-space positional gradient norm is accumulated separately as the
/// densification statistic.
struct ParamGradients {
  std::vector<Eigen::Vector3d> position;
  std::vector<Eigen::Vector4d> rotation;
  std::vector<Eigen::Vector3d> log_scale;
  std::vector<double> opacity_logit;
  std::vector<std::vector<double>> sh;
  std::vector<double> mean2d_grad_norm;

  explicit ParamGradients(const GaussianCloud& cloud);
  ParamGradients() = default;

  void add_scaled(const ParamGradients& other, double scale);
  bool all_finite() const;
};

struct RenderContext;  // backward state, defined in the implementation

/// Forward splatting result. depth is the alpha-weighted expected
/// camera-space depth normalized by accumulated alpha (0 where alpha is 0).
struct RenderTarget {
  Image color;  // H x W x C
  Image depth;  // H x W
  Image alpha;  // H x W, in [0, 1]
  std::shared_ptr<const RenderContext> ctx;
};

/// Depth-sorted front-to-back alpha compositing of one cloud into one view:
/// c = sum_i c_i * a_i * prod_{j<i} (1 - a_j) with
/// a_i = sigmoid(o_i) * exp(-1/2 d^T Sigma'^-1 d), ties in the depth sort
/// broken by Gaussian index. Deterministic: identical inputs give
/// bit-identical outputs for any worker count.
RenderTarget render(const GaussianCloud& cloud, const CameraView& view);

/// Analytic adjoint of render. dL_dcolor must be H x W x C and dL_ddepth
/// H x W (it may be empty when no depth gradient flows). The returned
/// gradients satisfy the chain rule of the exact forward compositing
/// expression.
ParamGradients render_backward(const RenderContext& ctx,
                               const Image& dL_dcolor, const Image& dL_ddepth);

}  // namespace beamsplit
