#include "beamsplit/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "beamsplit/errors.hpp"

namespace beamsplit {

Image::Image(int width, int height, int channels, double fill)
    : width_(width),
      height_(height),
      channels_(channels),
      data_(static_cast<std::size_t>(width) * height * channels, fill) {}

void Image::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Image::clamp(double lo, double hi) {
  for (double& v : data_) v = std::clamp(v, lo, hi);
}

double Image::min_value() const {
  double m = std::numeric_limits<double>::infinity();
  for (double v : data_) m = std::min(m, v);
  return m;
}

double Image::max_value() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : data_) m = std::max(m, v);
  return m;
}

bool Image::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Image Image::channel_mean() const {
  Image out(width_, height_, 1);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      double s = 0.0;
      for (int c = 0; c < channels_; ++c) s += at(x, y, c);
      out.at(x, y) = s / channels_;
    }
  }
  return out;
}

void require_same_shape(const Image& a, const Image& b, const char* where) {
  if (!a.same_shape(b)) {
    throw shape_mismatch_error(std::string(where) + ": image shapes differ (" +
                               std::to_string(a.width()) + "x" +
                               std::to_string(a.height()) + "x" +
                               std::to_string(a.channels()) + " vs " +
                               std::to_string(b.width()) + "x" +
                               std::to_string(b.height()) + "x" +
                               std::to_string(b.channels()) + ")");
  }
}

}  // namespace beamsplit
