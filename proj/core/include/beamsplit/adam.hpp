#pragma once

#include "beamsplit/gaussian.hpp"
#include "beamsplit/rasterizer.hpp"

namespace beamsplit {

/// Per-parameter-group learning rates. The position rate is multiplied by
/// the scene extent before use so that step sizes scale with the scene.
struct LearningRates {
  double position = 1.6e-4;
  double rotation = 1e-3;
  double scale = 5e-3;
  double opacity = 5e-2;
  double sh = 2.5e-3;

  LearningRates scaled(double factor) const {
    return {position * factor, rotation * factor, scale * factor,
            opacity * factor, sh * factor};
  }
};

/// First/second moment accumulators congruent with one cloud's parameters,
/// plus the shared step counter. Shapes track densification events.
struct AdamState {
  ParamGradients m;
  ParamGradients v;
  long step = 0;

  explicit AdamState(const GaussianCloud& cloud) : m(cloud), v(cloud) {}
  AdamState() = default;

  bool congruent_with(const GaussianCloud& cloud) const {
    return m.position.size() == cloud.size() &&
           v.position.size() == cloud.size();
  }
};

/// One Adam update of every parameter in the cloud. position_extent_scale
/// multiplies the position rate. Quaternions are not renormalized here; the
/// caller does that after the step.
void adam_step(GaussianCloud& cloud, const ParamGradients& grads,
               AdamState& state, const LearningRates& rates,
               double position_extent_scale, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

}  // namespace beamsplit
