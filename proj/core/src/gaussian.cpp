#include "beamsplit/gaussian.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "beamsplit/errors.hpp"

namespace beamsplit {

void GaussianCloud::renormalize_rotations() {
  for (auto& g : gaussians) {
    const double n2 = g.rotation.squaredNorm();
    // Leave already-unit quaternions bit-identical.
    if (n2 > 0.0 && std::abs(n2 - 1.0) > 1e-12) {
      g.rotation /= std::sqrt(n2);
    }
  }
}

bool GaussianCloud::valid() const {
  for (const auto& g : gaussians) {
    if (!g.position.allFinite() || !g.rotation.allFinite() ||
        !g.log_scale.allFinite() || !std::isfinite(g.opacity_logit)) {
      return false;
    }
    if (std::abs(g.rotation.norm() - 1.0) > 1e-6) return false;
    if (g.sh.degree != sh_degree || g.sh.channels != channels) return false;
    if (g.sh.coeffs.size() !=
        static_cast<std::size_t>(g.sh.basis_count()) * channels) {
      return false;
    }
    for (double c : g.sh.coeffs)
      if (!std::isfinite(c)) return false;
  }
  return true;
}

Eigen::Matrix3d rotation_from_quaternion(const Eigen::Vector4d& q) {
  const Eigen::Vector4d qn = q / q.norm();
  const double w = qn[0], x = qn[1], y = qn[2], z = qn[3];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Eigen::Matrix3d covariance_from_params(const Eigen::Vector4d& q,
                                       const Eigen::Vector3d& log_scale) {
  if (std::abs(q.norm() - 1.0) > 1e-6) {
    throw invalid_parameter_error(
        "covariance_from_params: quaternion not unit length");
  }
  return covariance_from_params_lenient(q, log_scale);
}

Eigen::Matrix3d covariance_from_params_lenient(const Eigen::Vector4d& q,
                                               const Eigen::Vector3d& log_scale) {
  if (!q.allFinite() || !log_scale.allFinite()) {
    throw invalid_parameter_error("covariance_from_params: non-finite input");
  }
  if (q.norm() < 1e-12) {
    throw invalid_parameter_error("covariance_from_params: zero quaternion");
  }
  const Eigen::Matrix3d r = rotation_from_quaternion(q);
  const Eigen::Vector3d s = log_scale.array().exp();
  const Eigen::Matrix3d m = r * s.asDiagonal();
  return m * m.transpose();
}

void covariance_from_params_backward(const Eigen::Vector4d& q,
                                     const Eigen::Vector3d& log_scale,
                                     const Eigen::Matrix3d& grad_cov,
                                     Eigen::Vector4d& grad_q,
                                     Eigen::Vector3d& grad_log_scale) {
  const double qnorm = q.norm();
  const Eigen::Vector4d qn = q / qnorm;
  const double w = qn[0], x = qn[1], y = qn[2], z = qn[3];
  const Eigen::Matrix3d r = rotation_from_quaternion(q);
  const Eigen::Vector3d s = log_scale.array().exp();
  const Eigen::Matrix3d m = r * s.asDiagonal();

  // Sigma = M M^T  =>  dM = (G + G^T) M, then M = R S splits into R and s.
  const Eigen::Matrix3d dM = (grad_cov + grad_cov.transpose()) * m;
  const Eigen::Matrix3d dR = dM * s.asDiagonal();
  const Eigen::Matrix3d rt_dM = r.transpose() * dM;
  for (int k = 0; k < 3; ++k) grad_log_scale[k] += rt_dM(k, k) * s[k];

  Eigen::Matrix3d dRdq[4];
  dRdq[0] << 0, -z, y, z, 0, -x, -y, x, 0;
  dRdq[1] << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
  dRdq[2] << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
  dRdq[3] << -2 * z, -w, x, w, -2 * z, y, x, y, 0;

  Eigen::Vector4d g_unit;
  for (int i = 0; i < 4; ++i) {
    g_unit[i] = 2.0 * (dR.array() * dRdq[i].array()).sum();
  }
  // Through the normalization q_hat = q / |q|.
  grad_q += (g_unit - qn * qn.dot(g_unit)) / qnorm;
}

double eval_gaussian(const Eigen::Vector3d& mu, const Eigen::Matrix3d& cov,
                     const Eigen::Vector3d& x) {
  if (!mu.allFinite() || !cov.allFinite() || !x.allFinite()) {
    throw invalid_parameter_error("eval_gaussian: non-finite input");
  }
  Eigen::LLT<Eigen::Matrix3d> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw degenerate_covariance_error(
        "eval_gaussian: covariance not positive definite");
  }
  const Eigen::Matrix3d l = llt.matrixL();
  const double sqrt_det = l(0, 0) * l(1, 1) * l(2, 2);
  if (!(sqrt_det > 0.0) || !std::isfinite(sqrt_det)) {
    throw degenerate_covariance_error("eval_gaussian: singular covariance");
  }
  const Eigen::Vector3d d = x - mu;
  const double quad = d.dot(llt.solve(d));
  constexpr double kTwoPiPow = 15.749609945722419;  // (2*pi)^(3/2)
  return std::exp(-0.5 * quad) / (kTwoPiPow * sqrt_det);
}

}  // namespace beamsplit
