#include "beamsplit/tonemap.hpp"

#include <cmath>

#include "beamsplit/errors.hpp"

namespace beamsplit {

ToneCurve::ToneCurve(double exponent) : exponent_(exponent) {
  if (!(exponent > 0.0 && exponent <= 1.0)) {
    throw invalid_parameter_error("ToneCurve: exponent must lie in (0, 1]");
  }
}

double ToneCurve::apply(double x) const {
  if (x < 0.0) throw invalid_parameter_error("gamma: negative input");
  if (x > 1.0) {
    clamp_count_.fetch_add(1, std::memory_order_relaxed);
    x = 1.0;
  }
  return std::pow(x, exponent_);
}

double ToneCurve::apply_inv(double y) const {
  if (y < 0.0) throw invalid_parameter_error("gamma_inv: negative input");
  if (y > 1.0) {
    clamp_count_.fetch_add(1, std::memory_order_relaxed);
    y = 1.0;
  }
  return std::pow(y, 1.0 / exponent_);
}

Image ToneCurve::apply(const Image& x) const {
  Image out(x.width(), x.height(), x.channels());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = apply(x[i]);
  return out;
}

Image ToneCurve::apply_inv(const Image& x) const {
  Image out(x.width(), x.height(), x.channels());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = apply_inv(x[i]);
  return out;
}

}  // namespace beamsplit
