#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "beamsplit/image.hpp"

namespace beamsplit {

/// Gaussians whose camera-space depth falls at or behind this plane are
/// culled per view.
inline constexpr double kZNear = 0.01;

/// Screen-space low-pass dilation added to every projected covariance, in
/// squared pixels. Keeps sub-pixel Gaussians from vanishing and their
/// gradients finite.
inline constexpr double kCovDilation = 0.3;

struct Intrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  bool valid() const {
    return fx > 0 && fy > 0 && cx > 0 && cx < width && cy > 0 && cy < height;
  }
};

/// Rigid world-to-camera transform: x_cam = rotation * x_world + translation.
struct RigidPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d to_camera(const Eigen::Vector3d& x_world) const {
    return rotation * x_world + translation;
  }
  Eigen::Vector3d to_world(const Eigen::Vector3d& x_cam) const {
    return rotation.transpose() * (x_cam - translation);
  }
  Eigen::Vector3d camera_center() const {
    return -(rotation.transpose() * translation);
  }
  RigidPose inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }
  /// Orthonormal with determinant +1, within tol.
  bool valid(double tol = 1e-9) const;
};

/// One capture: pinhole intrinsics, pose, flash flag, and (optionally) the
/// observed raw-linear image in [0,1].
struct CameraView {
  std::string view_id;
  Intrinsics intrinsics;
  RigidPose world_to_cam;
  bool flash = false;
  bool holdout = false;
  Image image;  // empty for poses used only for novel-view rendering

  bool has_image() const { return !image.empty(); }
};

/// Unpaired multi-view captures. Valid sets contain at least one flash and
/// one no-flash view; no alignment is assumed between any flash and no-flash
/// pose.
struct CaptureSet {
  std::vector<CameraView> views;

  int count_flash() const;
  int count_noflash() const;
  bool valid() const { return count_flash() >= 1 && count_noflash() >= 1; }
};

struct ProjectedPoint {
  Eigen::Vector2d pixel;
  double depth = 0;
};

/// Pinhole projection of a world point. Throws behind_camera_error when the
/// camera-space depth is at or behind kZNear; the caller culls.
ProjectedPoint project_point(const CameraView& view,
                             const Eigen::Vector3d& x_world);

/// First-order perspective Jacobian d(pixel)/d(camera point), evaluated at
/// camera-space point t. The lateral ratios tx/tz, ty/tz are clamped to
/// 1.3x the frustum half-extent so that off-screen splats keep a bounded
/// Jacobian; *clamped_x/*clamped_y report whether the clamp engaged.
Eigen::Matrix<double, 2, 3> perspective_jacobian(const Intrinsics& intr,
                                                 const Eigen::Vector3d& t_cam,
                                                 bool* clamped_x = nullptr,
                                                 bool* clamped_y = nullptr);

/// EWA projection of a world covariance to a 2x2 screen covariance:
/// Sigma' = J * W * Sigma * W^T * J^T + kCovDilation * I.
Eigen::Matrix2d project_covariance(const Eigen::Matrix3d& cov_world,
                                   const Eigen::Matrix3d& w_rotation,
                                   const Eigen::Matrix<double, 2, 3>& jacobian);

/// JSON (de)serialization of pose records:
/// {view_id, flash, fx, fy, cx, cy, width, height,
///  rotation (row-major 9 floats), translation (3 floats)}
/// plus an optional holdout flag. Images are not part of this format.
std::string poses_to_json(const std::vector<CameraView>& views);
std::vector<CameraView> poses_from_json(const std::string& json_text);
void save_poses(const std::string& path, const std::vector<CameraView>& views);
std::vector<CameraView> load_poses(const std::string& path);

}  // namespace beamsplit
