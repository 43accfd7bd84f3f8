#include "beamsplit/adam.hpp"

#include <cmath>

#include "beamsplit/errors.hpp"

namespace beamsplit {

namespace {

inline double adam_update(double grad, double& m, double& v, double lr,
                          double bc1, double bc2, double beta1, double beta2,
                          double eps) {
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad * grad;
  const double mhat = m / bc1;
  const double vhat = v / bc2;
  return -lr * mhat / (std::sqrt(vhat) + eps);
}

}  // namespace

void adam_step(GaussianCloud& cloud, const ParamGradients& grads,
               AdamState& state, const LearningRates& rates,
               double position_extent_scale, double beta1, double beta2,
               double eps) {
  const std::size_t n = cloud.size();
  if (grads.position.size() != n || !state.congruent_with(cloud)) {
    throw invalid_gradient_shape_error("adam_step: shape mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  const double lr_pos = rates.position * position_extent_scale;

  for (std::size_t i = 0; i < n; ++i) {
    Gaussian3D& g = cloud.gaussians[i];
    for (int k = 0; k < 3; ++k) {
      g.position[k] += adam_update(grads.position[i][k], state.m.position[i][k],
                                   state.v.position[i][k], lr_pos, bc1, bc2,
                                   beta1, beta2, eps);
      g.log_scale[k] += adam_update(
          grads.log_scale[i][k], state.m.log_scale[i][k],
          state.v.log_scale[i][k], rates.scale, bc1, bc2, beta1, beta2, eps);
    }
    for (int k = 0; k < 4; ++k) {
      g.rotation[k] += adam_update(grads.rotation[i][k], state.m.rotation[i][k],
                                   state.v.rotation[i][k], rates.rotation, bc1,
                                   bc2, beta1, beta2, eps);
    }
    g.opacity_logit += adam_update(
        grads.opacity_logit[i], state.m.opacity_logit[i],
        state.v.opacity_logit[i], rates.opacity, bc1, bc2, beta1, beta2, eps);
    for (std::size_t k = 0; k < g.sh.coeffs.size(); ++k) {
      g.sh.coeffs[k] +=
          adam_update(grads.sh[i][k], state.m.sh[i][k], state.v.sh[i][k],
                      rates.sh, bc1, bc2, beta1, beta2, eps);
    }
  }
}

}  // namespace beamsplit
