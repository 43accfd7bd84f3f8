#include "beamsplit/camera.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "beamsplit/errors.hpp"

namespace beamsplit {

using nlohmann::json;

bool RigidPose::valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const Eigen::Matrix3d rtr = rotation.transpose() * rotation;
  if ((rtr - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol)
    return false;
  return rotation.determinant() > 0.0;
}

int CaptureSet::count_flash() const {
  return static_cast<int>(
      std::count_if(views.begin(), views.end(),
                    [](const CameraView& v) { return v.flash; }));
}

int CaptureSet::count_noflash() const {
  return static_cast<int>(views.size()) - count_flash();
}

ProjectedPoint project_point(const CameraView& view,
                             const Eigen::Vector3d& x_world) {
  const Eigen::Vector3d t = view.world_to_cam.to_camera(x_world);
  if (!(t.z() > kZNear)) {
    throw behind_camera_error("project_point: point at or behind near plane");
  }
  const Intrinsics& k = view.intrinsics;
  return {Eigen::Vector2d(k.fx * t.x() / t.z() + k.cx,
                          k.fy * t.y() / t.z() + k.cy),
          t.z()};
}

Eigen::Matrix<double, 2, 3> perspective_jacobian(const Intrinsics& intr,
                                                 const Eigen::Vector3d& t,
                                                 bool* clamped_x,
                                                 bool* clamped_y) {
  const double limx = 1.3 * (0.5 * intr.width / intr.fx);
  const double limy = 1.3 * (0.5 * intr.height / intr.fy);
  const double inv_z = 1.0 / t.z();
  const double u = t.x() * inv_z;
  const double v = t.y() * inv_z;
  const double uc = std::clamp(u, -limx, limx);
  const double vc = std::clamp(v, -limy, limy);
  if (clamped_x) *clamped_x = (u != uc);
  if (clamped_y) *clamped_y = (v != vc);
  Eigen::Matrix<double, 2, 3> j;
  j << intr.fx * inv_z, 0, -intr.fx * uc * inv_z,
      0, intr.fy * inv_z, -intr.fy * vc * inv_z;
  return j;
}

Eigen::Matrix2d project_covariance(const Eigen::Matrix3d& cov_world,
                                   const Eigen::Matrix3d& w_rotation,
                                   const Eigen::Matrix<double, 2, 3>& jacobian) {
  const Eigen::Matrix<double, 2, 3> jw = jacobian * w_rotation;
  Eigen::Matrix2d out = jw * cov_world * jw.transpose();
  out(0, 0) += kCovDilation;
  out(1, 1) += kCovDilation;
  // Congruence preserves symmetry; enforce it against roundoff drift.
  const double off = 0.5 * (out(0, 1) + out(1, 0));
  out(0, 1) = out(1, 0) = off;
  return out;
}

static json view_to_json(const CameraView& v) {
  json j;
  j["view_id"] = v.view_id;
  j["flash"] = v.flash;
  j["fx"] = v.intrinsics.fx;
  j["fy"] = v.intrinsics.fy;
  j["cx"] = v.intrinsics.cx;
  j["cy"] = v.intrinsics.cy;
  j["width"] = v.intrinsics.width;
  j["height"] = v.intrinsics.height;
  std::vector<double> rot(9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot[r * 3 + c] = v.world_to_cam.rotation(r, c);
  j["rotation"] = rot;
  j["translation"] = {v.world_to_cam.translation.x(),
                      v.world_to_cam.translation.y(),
                      v.world_to_cam.translation.z()};
  if (v.holdout) j["holdout"] = true;
  return j;
}

static CameraView view_from_json(const json& j) {
  CameraView v;
  v.view_id = j.at("view_id").get<std::string>();
  v.flash = j.at("flash").get<bool>();
  v.intrinsics.fx = j.at("fx").get<double>();
  v.intrinsics.fy = j.at("fy").get<double>();
  v.intrinsics.cx = j.at("cx").get<double>();
  v.intrinsics.cy = j.at("cy").get<double>();
  v.intrinsics.width = j.at("width").get<int>();
  v.intrinsics.height = j.at("height").get<int>();
  const auto rot = j.at("rotation").get<std::vector<double>>();
  const auto tr = j.at("translation").get<std::vector<double>>();
  if (rot.size() != 9 || tr.size() != 3) {
    throw data_error("pose record: rotation/translation size mismatch");
  }
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) v.world_to_cam.rotation(r, c) = rot[r * 3 + c];
  v.world_to_cam.translation = Eigen::Vector3d(tr[0], tr[1], tr[2]);
  v.holdout = j.value("holdout", false);
  if (!v.intrinsics.valid()) throw data_error("pose record: bad intrinsics");
  if (!v.world_to_cam.valid(1e-6)) {
    throw data_error("pose record: rotation not orthonormal");
  }
  return v;
}

std::string poses_to_json(const std::vector<CameraView>& views) {
  json j = json::array();
  for (const auto& v : views) j.push_back(view_to_json(v));
  return j.dump(2);
}

std::vector<CameraView> poses_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw data_error(std::string("poses: malformed JSON: ") + e.what());
  }
  if (!j.is_array()) throw data_error("poses: expected a JSON array");
  std::vector<CameraView> out;
  out.reserve(j.size());
  for (const auto& item : j) out.push_back(view_from_json(item));
  return out;
}

void save_poses(const std::string& path, const std::vector<CameraView>& views) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open for write: " + path);
  f << poses_to_json(views) << "\n";
}

std::vector<CameraView> load_poses(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return poses_from_json(text);
}

}  // namespace beamsplit
