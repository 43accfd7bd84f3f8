#pragma once

#include <Eigen/Core>
#include <vector>

namespace beamsplit {

// Real spherical-harmonic constants, one fixed convention project-wide:
//   band 0: Y00 = 1/(2*sqrt(pi))
//   band 1: 0.4886025 * (-y, z, -x) applied to coefficients 1, 2, 3.
inline constexpr double kSH0 = 0.2820948;
inline constexpr double kSH1 = 0.4886025;

/// Spherical-harmonic coefficients of one Gaussian: degree L in {0,1},
/// (L+1)^2 basis functions with `channels` values each, stored basis-major:
/// coeffs[b * channels + c].
struct SHCoeffs {
  int degree = 0;
  int channels = 3;
  std::vector<double> coeffs;

  SHCoeffs() = default;
  SHCoeffs(int degree_, int channels_)
      : degree(degree_),
        channels(channels_),
        coeffs(static_cast<std::size_t>((degree_ + 1) * (degree_ + 1)) *
               channels_) {}

  int basis_count() const { return (degree + 1) * (degree + 1); }
  std::size_t size() const { return coeffs.size(); }

  double& dc(int channel) { return coeffs[channel]; }
  double dc(int channel) const { return coeffs[channel]; }
};

/// Evaluates the SH expansion at unit direction `dir`. Strictly linear in the
/// coefficients; degree 0 is direction-independent. Throws
/// invalid_parameter_error if dir is non-finite or not unit within 1e-6.
Eigen::Vector3d eval_sh(const SHCoeffs& sh, const Eigen::Vector3d& dir);

/// Basis values at `dir`, in coefficient order (size (L+1)^2).
void sh_basis(int degree, const Eigen::Vector3d& dir, double* out);

/// Accumulates d(loss)/d(coeffs) and d(loss)/d(dir) given d(loss)/d(value).
/// grad_coeffs must have sh.size() entries; grad_dir may be null for L = 0.
void eval_sh_backward(const SHCoeffs& sh, const Eigen::Vector3d& dir,
                      const Eigen::Vector3d& grad_value, double* grad_coeffs,
                      Eigen::Vector3d* grad_dir);

/// DC coefficient that makes a degree-0 expansion evaluate to `value`.
inline double sh_dc_from_value(double value) { return value / kSH0; }

}  // namespace beamsplit
