#pragma once

#include <cstddef>
#include <vector>

namespace beamsplit {

/// Dense H x W x C map of doubles, row-major, channel-interleaved.
/// All rendering, loss and metric code operates on this type; file I/O
/// converts to float32 at the boundary (PFM) or 8-bit (PNG previews).
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }
  bool same_plane(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  void fill(double v);
  /// Per-element clamp to [lo, hi].
  void clamp(double lo, double hi);
  double min_value() const;
  double max_value() const;
  bool all_finite() const;

  /// Mean over the channel dimension; returns an H x W x 1 map.
  Image channel_mean() const;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Throws shape_mismatch_error unless a and b have identical dimensions.
void require_same_shape(const Image& a, const Image& b, const char* where);

}  // namespace beamsplit
