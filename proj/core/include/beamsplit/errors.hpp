#pragma once

#include <stdexcept>
#include <string>

namespace beamsplit {

// Non-finite or out-of-contract parameter fed to a numeric routine.
struct invalid_parameter_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Covariance matrix that is singular or not positive definite.
struct degenerate_covariance_error : std::domain_error {
  using std::domain_error::domain_error;
};

// Point at or behind the near plane; the caller is expected to cull.
struct behind_camera_error : std::domain_error {
  using std::domain_error::domain_error;
};

// Two maps whose dimensions disagree.
struct shape_mismatch_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Gradient buffers not congruent with the forward pass.
struct invalid_gradient_shape_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Degenerate camera-center geometry; caller may force the identity transform.
struct alignment_unreliable_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or self-contradictory configuration.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Missing or malformed files and datasets.
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace beamsplit
