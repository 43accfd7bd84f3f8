#include "beamsplit/sh.hpp"

#include <cmath>

#include "beamsplit/errors.hpp"

namespace beamsplit {

void sh_basis(int degree, const Eigen::Vector3d& dir, double* out) {
  out[0] = kSH0;
  if (degree >= 1) {
    out[1] = -kSH1 * dir.y();
    out[2] = kSH1 * dir.z();
    out[3] = -kSH1 * dir.x();
  }
}

static void check_dir(const Eigen::Vector3d& dir) {
  if (!dir.allFinite()) {
    throw invalid_parameter_error("eval_sh: non-finite direction");
  }
  if (std::abs(dir.norm() - 1.0) > 1e-6) {
    throw invalid_parameter_error("eval_sh: direction not unit length");
  }
}

Eigen::Vector3d eval_sh(const SHCoeffs& sh, const Eigen::Vector3d& dir) {
  check_dir(dir);
  double basis[4];
  sh_basis(sh.degree, dir, basis);
  Eigen::Vector3d value = Eigen::Vector3d::Zero();
  const int n = sh.basis_count();
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < sh.channels; ++c) {
      value[c] += basis[b] * sh.coeffs[static_cast<std::size_t>(b) * sh.channels + c];
    }
  }
  return value;
}

void eval_sh_backward(const SHCoeffs& sh, const Eigen::Vector3d& dir,
                      const Eigen::Vector3d& grad_value, double* grad_coeffs,
                      Eigen::Vector3d* grad_dir) {
  double basis[4];
  sh_basis(sh.degree, dir, basis);
  const int n = sh.basis_count();
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < sh.channels; ++c) {
      grad_coeffs[static_cast<std::size_t>(b) * sh.channels + c] +=
          basis[b] * grad_value[c];
    }
  }
  if (grad_dir && sh.degree >= 1) {
    for (int c = 0; c < sh.channels; ++c) {
      const double g = grad_value[c];
      const double c1 = sh.coeffs[static_cast<std::size_t>(1) * sh.channels + c];
      const double c2 = sh.coeffs[static_cast<std::size_t>(2) * sh.channels + c];
      const double c3 = sh.coeffs[static_cast<std::size_t>(3) * sh.channels + c];
      grad_dir->x() += g * (-kSH1 * c3);
      grad_dir->y() += g * (-kSH1 * c1);
      grad_dir->z() += g * (kSH1 * c2);
    }
  }
}

}  // namespace beamsplit
