#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "beamsplit/gaussian.hpp"

namespace beamsplit {

/// Sparse colored points, ASCII PLY with properties x,y,z,red,green,blue.
/// Colors are 8-bit display-gamma values on disk and raw-linear in memory;
/// the conversion is v_disk = round(255 * clamp(c)^(1/2.2)) and its inverse
/// (v/255)^2.2 on read, applied deterministically.
struct PointSet {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3d> colors;  // raw-linear, in [0,1]

  std::size_t size() const { return positions.size(); }
};

void write_points_ply(const std::string& path, const PointSet& points);
PointSet read_points_ply(const std::string& path);

/// Full Gaussian cloud checkpoint, binary little-endian PLY with double
/// properties (exact round trip of the training state).
void write_cloud_ply(const std::string& path, const GaussianCloud& cloud);
GaussianCloud read_cloud_ply(const std::string& path);

}  // namespace beamsplit
