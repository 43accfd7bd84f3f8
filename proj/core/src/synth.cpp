#include "beamsplit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "beamsplit/errors.hpp"

namespace beamsplit {

using nlohmann::json;

std::string synth_spec_to_json(const SynthSpec& s) {
  json j;
  j["seed"] = s.seed;
  j["width"] = s.width;
  j["height"] = s.height;
  j["n_flash"] = s.n_flash;
  j["n_noflash"] = s.n_noflash;
  j["n_holdout"] = s.n_holdout;
  j["alpha"] = s.alpha;
  j["beta_f"] = s.beta_f;
  j["flash_falloff"] = s.flash_falloff;
  j["fov_deg"] = s.fov_deg;
  j["arc_radius"] = s.arc_radius;
  j["arc_span_deg"] = s.arc_span_deg;
  j["jitter"] = s.jitter;
  j["points_per_plane"] = s.points_per_plane;
  j["point_color_noise"] = s.point_color_noise;
  return j.dump(2);
}

SynthSpec synth_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("synth spec: malformed JSON: ") + e.what());
  }
  SynthSpec s;
  s.seed = j.value("seed", s.seed);
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  s.n_flash = j.value("n_flash", s.n_flash);
  s.n_noflash = j.value("n_noflash", s.n_noflash);
  s.n_holdout = j.value("n_holdout", s.n_holdout);
  s.alpha = j.value("alpha", s.alpha);
  s.beta_f = j.value("beta_f", s.beta_f);
  s.flash_falloff = j.value("flash_falloff", s.flash_falloff);
  s.fov_deg = j.value("fov_deg", s.fov_deg);
  s.arc_radius = j.value("arc_radius", s.arc_radius);
  s.arc_span_deg = j.value("arc_span_deg", s.arc_span_deg);
  s.jitter = j.value("jitter", s.jitter);
  s.points_per_plane = j.value("points_per_plane", s.points_per_plane);
  s.point_color_noise = j.value("point_color_noise", s.point_color_noise);
  if (!s.valid()) throw config_error("synth spec: invalid values");
  return s;
}

SynthSpec load_synth_spec(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return synth_spec_from_json(text);
}

namespace {

double sample_bilinear(const Image& tex, double u, double v, int c) {
  u = std::clamp(u, 0.0, 1.0);
  v = std::clamp(v, 0.0, 1.0);
  const double gx = u * (tex.width() - 1);
  const double gy = v * (tex.height() - 1);
  const int x0 = static_cast<int>(gx), y0 = static_cast<int>(gy);
  const int x1 = std::min(x0 + 1, tex.width() - 1);
  const int y1 = std::min(y0 + 1, tex.height() - 1);
  const double fx = gx - x0, fy = gy - y0;
  return (1 - fx) * (1 - fy) * tex.at(x0, y0, c) +
         fx * (1 - fy) * tex.at(x1, y0, c) +
         (1 - fx) * fy * tex.at(x0, y1, c) + fx * fy * tex.at(x1, y1, c);
}

// Checker + gradient + seeded smooth blobs, clamped to [lo, hi].
Image make_color_texture(std::mt19937_64& rng, int w, int h, double lo,
                         double hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double range = hi - lo;
  Eigen::Vector3d ca, cb;
  for (int k = 0; k < 3; ++k) {
    ca[k] = lo + range * (0.15 + 0.8 * u(rng));
    cb[k] = lo + range * (0.15 + 0.8 * u(rng));
  }
  const int tiles_x = 4 + static_cast<int>(u(rng) * 5);
  const int tiles_y = 3 + static_cast<int>(u(rng) * 4);
  struct Blob {
    double cx, cy, sigma;
    Eigen::Vector3d color;
  };
  std::vector<Blob> blobs(6);
  for (auto& b : blobs) {
    b.cx = u(rng);
    b.cy = u(rng);
    b.sigma = 0.04 + 0.12 * u(rng);
    for (int k = 0; k < 3; ++k) b.color[k] = (u(rng) - 0.5) * range;
  }
  const double gphase = u(rng) * 6.283185307179586;

  Image tex(w, h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double uu = (x + 0.5) / w, vv = (y + 0.5) / h;
      const bool parity = ((static_cast<int>(uu * tiles_x) +
                            static_cast<int>(vv * tiles_y)) % 2) == 0;
      Eigen::Vector3d col = parity ? ca : cb;
      const double grad =
          0.15 * range * std::sin(2.0 * 3.141592653589793 * uu + gphase);
      for (int k = 0; k < 3; ++k) col[k] += grad;
      for (const auto& b : blobs) {
        const double d2 = (uu - b.cx) * (uu - b.cx) + (vv - b.cy) * (vv - b.cy);
        const double g = std::exp(-0.5 * d2 / (b.sigma * b.sigma));
        for (int k = 0; k < 3; ++k) col[k] += b.color[k] * g;
      }
      for (int k = 0; k < 3; ++k) tex.at(x, y, k) = std::clamp(col[k], lo, hi);
    }
  }
  return tex;
}

// Smooth beta mask in [0, hi] with genuinely reflection-free zones.
Image make_beta_texture(std::mt19937_64& rng, int w, int h, double hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  struct Blob {
    double cx, cy, sigma, amp;
  };
  std::vector<Blob> blobs(5);
  for (auto& b : blobs) {
    b.cx = u(rng);
    b.cy = u(rng);
    b.sigma = 0.08 + 0.18 * u(rng);
    b.amp = hi * (0.5 + 0.6 * u(rng));
  }
  const double px = 1.5 + 2.0 * u(rng), py = 1.0 + 1.5 * u(rng);
  Image tex(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double uu = (x + 0.5) / w, vv = (y + 0.5) / h;
      double v = 0.35 * hi *
                 (1.0 + std::sin(3.141592653589793 * px * uu) *
                            std::sin(3.141592653589793 * py * vv));
      for (const auto& b : blobs) {
        const double d2 = (uu - b.cx) * (uu - b.cx) + (vv - b.cy) * (vv - b.cy);
        v += b.amp * std::exp(-0.5 * d2 / (b.sigma * b.sigma));
      }
      tex.at(x, y) = std::clamp(v - 0.12 * hi, 0.0, hi);
    }
  }
  return tex;
}

struct PlaneHit {
  bool hit = false;
  double t = 0;      // ray parameter
  double u = 0, v = 0;  // texture coordinates in [0,1]
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
};

PlaneHit intersect(const TexturedPlane& plane, const Eigen::Vector3d& origin,
                   const Eigen::Vector3d& dir) {
  PlaneHit h;
  const Eigen::Vector3d n = plane.normal();
  const double denom = dir.dot(n);
  if (std::abs(denom) < 1e-12) return h;
  const double t = (plane.center - origin).dot(n) / denom;
  if (t <= 1e-9) return h;
  const Eigen::Vector3d p = origin + t * dir;
  const Eigen::Vector3d local = p - plane.center;
  const double lu = local.dot(plane.axis_u) / plane.axis_u.squaredNorm();
  const double lv = local.dot(plane.axis_v) / plane.axis_v.squaredNorm();
  if (std::abs(lu) > 1.0 || std::abs(lv) > 1.0) return h;
  h.hit = true;
  h.t = t;
  h.u = 0.5 * (lu + 1.0);
  h.v = 0.5 * (lv + 1.0);
  h.point = p;
  return h;
}

// Camera with x_cam = W x_world + t looking from `pos` toward `target`,
// world +y up appearing up in the image.
RigidPose look_at(const Eigen::Vector3d& pos, const Eigen::Vector3d& target) {
  const Eigen::Vector3d zc = (target - pos).normalized();
  Eigen::Vector3d xc = Eigen::Vector3d(0, -1, 0).cross(zc);
  if (xc.norm() < 1e-9) xc = Eigen::Vector3d(1, 0, 0);
  xc.normalize();
  const Eigen::Vector3d yc = zc.cross(xc);
  RigidPose pose;
  pose.rotation.row(0) = xc;
  pose.rotation.row(1) = yc;
  pose.rotation.row(2) = zc;
  pose.translation = -(pose.rotation * pos);
  return pose;
}

}  // namespace

SyntheticScene build_scene(const SynthSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  SyntheticScene scene;
  scene.alpha = spec.alpha;
  scene.beta_f = spec.beta_f;
  scene.flash_falloff = spec.flash_falloff;
  scene.falloff_ref = spec.arc_radius;

  const double beta_hi = 0.5;
  const double r_hi = 0.7;
  // Keep (1 + alpha) * T + (beta + beta_f) * R within [0, 0.98].
  const double t_hi = std::min(
      0.4, (0.98 - (beta_hi + spec.beta_f) * r_hi) / (1.0 + spec.alpha));
  if (t_hi <= 0.03) throw config_error("synth spec: alpha/beta_f too large");

  scene.transmitted.center = Eigen::Vector3d(0, 0, 0);
  scene.transmitted.axis_u = Eigen::Vector3d(1.3, 0, 0);
  scene.transmitted.axis_v = Eigen::Vector3d(0, 1.0, 0);
  scene.transmitted.texture = make_color_texture(rng, 192, 144, 0.02, t_hi);

  scene.glass.center = Eigen::Vector3d(0, 0, 1.0);
  scene.glass.axis_u = Eigen::Vector3d(1.15, 0, 0);
  scene.glass.axis_v = Eigen::Vector3d(0, 0.9, 0);
  scene.glass.texture = make_beta_texture(rng, 160, 120, beta_hi);

  scene.reflected_virtual.center = Eigen::Vector3d(0, 0, -0.7);
  scene.reflected_virtual.axis_u = Eigen::Vector3d(1.8, 0, 0);
  scene.reflected_virtual.axis_v = Eigen::Vector3d(0, 1.4, 0);
  scene.reflected_virtual.texture = make_color_texture(rng, 192, 144, 0.02, r_hi);

  scene.background = Eigen::Vector3d(0.02, 0.02, 0.02);
  return scene;
}

OracleMaps render_oracle(const SyntheticScene& scene, const CameraView& view,
                         bool flash) {
  const Intrinsics& k = view.intrinsics;
  const int w = k.width, h = k.height;
  OracleMaps maps;
  maps.image = Image(w, h, 3);
  maps.t_n = Image(w, h, 3);
  maps.beta_r = Image(w, h, 3);
  maps.r_layer = Image(w, h, 3);
  maps.beta_map = Image(w, h, 1);
  maps.depth_t = Image(w, h, 1);
  maps.depth_r = Image(w, h, 1);
  maps.mask = Image(w, h, 1);

  const Eigen::Vector3d origin = view.world_to_cam.camera_center();
  const Eigen::Matrix3d rot_t = view.world_to_cam.rotation.transpose();

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d dir_cam((x + 0.5 - k.cx) / k.fx,
                                    (y + 0.5 - k.cy) / k.fy, 1.0);
      const Eigen::Vector3d dir = (rot_t * dir_cam).normalized();

      const PlaneHit ht = intersect(scene.transmitted, origin, dir);
      const PlaneHit hg = intersect(scene.glass, origin, dir);
      const PlaneHit hr = intersect(scene.reflected_virtual, origin, dir);

      Eigen::Vector3d t_col = scene.background;
      if (ht.hit) {
        for (int c = 0; c < 3; ++c) {
          t_col[c] = sample_bilinear(scene.transmitted.texture, ht.u, ht.v, c);
        }
        maps.depth_t.at(x, y) = view.world_to_cam.to_camera(ht.point).z();
      }
      const double beta =
          hg.hit ? sample_bilinear(scene.glass.texture, hg.u, hg.v, 0) : 0.0;
      Eigen::Vector3d r_col = Eigen::Vector3d::Zero();
      if (hr.hit) {
        for (int c = 0; c < 3; ++c) {
          r_col[c] =
              sample_bilinear(scene.reflected_virtual.texture, hr.u, hr.v, c);
        }
        maps.depth_r.at(x, y) = view.world_to_cam.to_camera(hr.point).z();
      }

      double gain = 1.0;
      if (flash) {
        double falloff = 1.0;
        if (scene.flash_falloff && ht.hit) {
          const double dist = (ht.point - origin).norm();
          falloff = (scene.falloff_ref * scene.falloff_ref) / (dist * dist);
        }
        gain = 1.0 + scene.alpha * falloff;
      }
      const double beta_eff = beta + (flash ? scene.beta_f : 0.0);

      maps.beta_map.at(x, y) = beta;
      double mask = ht.hit ? 1.0 : 0.0;
      if (hg.hit && beta > 0.01 && hr.hit) mask += 2.0;
      maps.mask.at(x, y) = mask;
      for (int c = 0; c < 3; ++c) {
        maps.t_n.at(x, y, c) = t_col[c];
        maps.r_layer.at(x, y, c) = r_col[c];
        maps.beta_r.at(x, y, c) = beta * r_col[c];
        maps.image.at(x, y, c) = gain * t_col[c] + beta_eff * r_col[c];
      }
    }
  }
  return maps;
}

SynthDataset emit_dataset(const SynthSpec& spec) {
  if (!spec.valid()) throw config_error("emit_dataset: invalid spec");
  SynthDataset ds;
  ds.spec = spec;
  ds.scene = build_scene(spec);

  std::mt19937_64 rng(spec.seed ^ 0xD1B54A32D192ED03ULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  Intrinsics intr;
  intr.width = spec.width;
  intr.height = spec.height;
  intr.fx = intr.fy =
      0.5 * spec.width / std::tan(0.5 * spec.fov_deg * M_PI / 180.0);
  intr.cx = 0.5 * spec.width;
  intr.cy = 0.5 * spec.height;

  // Flag sequence along the arc: interleave so both pools cover similar
  // perspectives, then drain the larger pool.
  std::vector<bool> flags;
  {
    int nf = spec.n_flash, nn = spec.n_noflash;
    bool next_flash = nf >= nn;
    while (nf > 0 || nn > 0) {
      if (next_flash && nf > 0) {
        flags.push_back(true);
        --nf;
      } else if (nn > 0) {
        flags.push_back(false);
        --nn;
      } else {
        flags.push_back(true);
        --nf;
      }
      next_flash = !next_flash;
    }
  }

  const int n_train = static_cast<int>(flags.size());
  const double span = spec.arc_span_deg * M_PI / 180.0;
  auto make_view = [&](double angle_frac, bool flash, bool holdout,
                       int index) {
    const double theta = span * (angle_frac - 0.5);
    Eigen::Vector3d pos(spec.arc_radius * std::sin(theta),
                        0.15 + spec.jitter * u(rng),
                        spec.arc_radius * std::cos(theta));
    Eigen::Vector3d target(spec.jitter * u(rng), spec.jitter * u(rng), 0.3);
    CameraView view;
    char id[32];
    std::snprintf(id, sizeof(id), "view_%03d", index);
    view.view_id = id;
    view.intrinsics = intr;
    view.world_to_cam = look_at(pos, target);
    view.flash = flash;
    view.holdout = holdout;
    return view;
  };

  int index = 0;
  for (int i = 0; i < n_train; ++i) {
    const double frac = n_train == 1 ? 0.5 : static_cast<double>(i) / (n_train - 1);
    CameraView view = make_view(frac, flags[i], false, index++);
    OracleMaps maps = render_oracle(ds.scene, view, view.flash);
    if (maps.image.max_value() > 1.0 + 1e-9) {
      throw config_error("emit_dataset: oracle image exceeds [0,1]");
    }
    view.image = maps.image;
    ds.captures.views.push_back(std::move(view));
    ds.gt.push_back(std::move(maps));
  }
  for (int i = 0; i < spec.n_holdout; ++i) {
    const double frac = (i + 0.5) / spec.n_holdout;
    CameraView view = make_view(frac, false, true, index++);
    OracleMaps maps = render_oracle(ds.scene, view, view.flash);
    view.image = maps.image;
    ds.captures.views.push_back(std::move(view));
    ds.gt.push_back(std::move(maps));
  }

  // SfM-like points: uniform samples on both planes with their local texture
  // colors; the flash cloud sees the transmitted plane brightened by (1+a).
  std::mt19937_64 prng(spec.seed ^ 0xA0761D6478BD642FULL);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  ds.flash_points.flash_source = true;

  auto add_noise = [&](Eigen::Vector3d c) {
    if (spec.point_color_noise > 0.0) {
      for (int k = 0; k < 3; ++k) {
        c[k] = std::clamp(c[k] * (1.0 + spec.point_color_noise * noise(prng)),
                          0.0, 1.0);
      }
    }
    return c;
  };

  for (int pass = 0; pass < 2; ++pass) {
    const bool transmitted_plane = pass == 0;
    const TexturedPlane& plane =
        transmitted_plane ? ds.scene.transmitted : ds.scene.reflected_virtual;
    for (int i = 0; i < spec.points_per_plane; ++i) {
      const double pu = u01(prng), pv = u01(prng);
      const Eigen::Vector3d pos = plane.center +
                                  (2 * pu - 1) * plane.axis_u +
                                  (2 * pv - 1) * plane.axis_v;
      Eigen::Vector3d col;
      for (int c = 0; c < 3; ++c) col[c] = sample_bilinear(plane.texture, pu, pv, c);
      const Eigen::Vector3d flash_col =
          transmitted_plane ? ((1.0 + spec.alpha) * col).eval() : col;
      const PointLabel label = transmitted_plane ? PointLabel::kTransmitted
                                                 : PointLabel::kReflected;
      ds.flash_points.positions.push_back(pos);
      ds.flash_points.colors.push_back(add_noise(flash_col));
      ds.flash_labels.push_back(label);
      ds.noflash_points.positions.push_back(pos);
      ds.noflash_points.colors.push_back(add_noise(col));
      ds.noflash_labels.push_back(label);
    }
  }
  return ds;
}

Image paired_subtract(const Image& i_f, const Image& i_n) {
  require_same_shape(i_f, i_n, "paired_subtract");
  Image out(i_f.width(), i_f.height(), i_f.channels());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::max(i_f[i] - i_n[i], 0.0);
  }
  return out;
}

}  // namespace beamsplit
