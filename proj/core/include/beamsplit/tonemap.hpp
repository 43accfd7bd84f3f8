#pragma once

#include <atomic>
#include <cstdint>

#include "beamsplit/image.hpp"

namespace beamsplit {

/// Power-law tone curve between raw-linear and display-domain intensities,
/// gamma(x) = x^exponent with gamma(0) = 0 and gamma(1) = 1.
///
/// Raw captures live in [0,1]; inputs above 1 are clamped and counted in
/// clamp_warnings() rather than rejected, since an unconverged model may
/// overshoot. Negative inputs are a contract violation and throw.
class ToneCurve {
 public:
  explicit ToneCurve(double exponent = 0.22);

  double exponent() const { return exponent_; }

  double apply(double x) const;       // gamma
  double apply_inv(double y) const;   // gamma^-1

  Image apply(const Image& x) const;
  Image apply_inv(const Image& x) const;

  /// Count of elements clamped from above 1 across all map applications.
  std::uint64_t clamp_warnings() const { return clamp_count_.load(); }
  void reset_clamp_warnings() { clamp_count_.store(0); }

 private:
  double exponent_;
  mutable std::atomic<std::uint64_t> clamp_count_{0};
};

}  // namespace beamsplit
