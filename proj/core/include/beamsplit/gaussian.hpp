#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <vector>

#include "beamsplit/sh.hpp"

namespace beamsplit {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// One anisotropic 3D Gaussian. The covariance is parameterized as a unit
/// quaternion plus per-axis log scales so that every unconstrained parameter
/// value maps to a valid positive-definite covariance. Opacity is stored as
/// a logit and activated with the logistic function.
struct Gaussian3D {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector4d rotation = Eigen::Vector4d(1, 0, 0, 0);  // (w, x, y, z)
  Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
  double opacity_logit = 0.0;
  SHCoeffs sh;

  double activated_opacity() const { return sigmoid(opacity_logit); }
};

/// Homogeneous collection of Gaussians: every member shares the same channel
/// count and SH degree for a whole run.
struct GaussianCloud {
  std::vector<Gaussian3D> gaussians;
  int channels = 3;
  int sh_degree = 0;

  std::size_t size() const { return gaussians.size(); }
  bool empty() const { return gaussians.empty(); }

  /// Renormalizes every rotation quaternion in place.
  void renormalize_rotations();
  /// True when every parameter is finite, quaternions are unit within 1e-6
  /// and SH layouts match the cloud's (channels, sh_degree).
  bool valid() const;
};

/// Rotation matrix of a quaternion that is normalized internally, plus the
/// factorization Sigma = R * diag(exp(s))^2 * R^T.
Eigen::Matrix3d rotation_from_quaternion(const Eigen::Vector4d& q);

/// Covariance from the (quaternion, log-scale) factorization. Requires |q|
/// within 1e-6 of 1 and finite inputs; the result is symmetric positive
/// definite with eigenvalues exp(2s) up to rotation.
Eigen::Matrix3d covariance_from_params(const Eigen::Vector4d& q,
                                       const Eigen::Vector3d& log_scale);

/// Same factorization without the unit-length precondition: the quaternion
/// is normalized internally. The rasterizer uses this on raw optimizer
/// parameters (for example under finite-difference perturbation); the
/// backward pass differentiates through the normalization.
Eigen::Matrix3d covariance_from_params_lenient(const Eigen::Vector4d& q,
                                               const Eigen::Vector3d& log_scale);

/// Chain-rule adjoint of covariance_from_params. `grad_cov` is d(loss)/dSigma
/// (treated as a full 3x3); accumulates into grad_q (raw quaternion, includes
/// the normalization projection) and grad_log_scale.
void covariance_from_params_backward(const Eigen::Vector4d& q,
                                     const Eigen::Vector3d& log_scale,
                                     const Eigen::Matrix3d& grad_cov,
                                     Eigen::Vector4d& grad_q,
                                     Eigen::Vector3d& grad_log_scale);

/// Normalized Gaussian density (2pi)^{-3/2} |Sigma|^{-1/2}
/// exp(-1/2 (x-mu)^T Sigma^{-1} (x-mu)). Throws degenerate_covariance_error
/// if Sigma is not positive definite.
double eval_gaussian(const Eigen::Vector3d& mu, const Eigen::Matrix3d& cov,
                     const Eigen::Vector3d& x);

}  // namespace beamsplit
