#include "beamsplit/flash_init.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>

#include "beamsplit/errors.hpp"
#include "beamsplit/tonemap.hpp"

namespace beamsplit {

std::size_t LabeledPoints::count(PointLabel l) const {
  return static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), l));
}

double luminance(const Eigen::Vector3d& rgb) {
  return 0.299 * rgb.x() + 0.587 * rgb.y() + 0.114 * rgb.z();
}

namespace {

// Canonical point order: lexicographic by position, then color, so that
// classification is invariant to the input permutation.
std::vector<std::size_t> canonical_order(const SfMPoints& pts) {
  std::vector<std::size_t> idx(pts.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = pts.positions[a];
    const auto& pb = pts.positions[b];
    for (int k = 0; k < 3; ++k) {
      if (pa[k] != pb[k]) return pa[k] < pb[k];
    }
    const auto& ca = pts.colors[a];
    const auto& cb = pts.colors[b];
    for (int k = 0; k < 3; ++k) {
      if (ca[k] != cb[k]) return ca[k] < cb[k];
    }
    return false;
  });
  return idx;
}

SfMPoints reorder(const SfMPoints& pts, const std::vector<std::size_t>& idx) {
  SfMPoints out;
  out.flash_source = pts.flash_source;
  out.positions.reserve(pts.size());
  out.colors.reserve(pts.size());
  for (std::size_t i : idx) {
    out.positions.push_back(pts.positions[i]);
    out.colors.push_back(pts.colors[i]);
  }
  return out;
}

// Brute-force nearest neighbor; ties keep the smallest index.
std::size_t nearest(const std::vector<Eigen::Vector3d>& set,
                    const Eigen::Vector3d& q, double* dist_out) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < set.size(); ++j) {
    const double d2 = (set[j] - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = j;
    }
  }
  if (dist_out) *dist_out = std::sqrt(best_d2);
  return best;
}

double median_nn_spacing(const std::vector<Eigen::Vector3d>& pts) {
  if (pts.size() < 2) return 0.0;
  std::vector<double> nn(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      best = std::min(best, (pts[j] - pts[i]).squaredNorm());
    }
    nn[i] = std::sqrt(best);
  }
  std::nth_element(nn.begin(), nn.begin() + nn.size() / 2, nn.end());
  return nn[nn.size() / 2];
}

}  // namespace

SimilarityTransform align_clouds(
    const std::vector<Eigen::Vector3d>& flash_centers,
    const std::vector<Eigen::Vector3d>& noflash_centers) {
  if (flash_centers.size() < 3 || noflash_centers.size() < 3) {
    throw alignment_unreliable_error("align_clouds: need >= 3 centers per side");
  }
  const std::size_t n = flash_centers.size();
  Eigen::Matrix3Xd src(3, n), dst(3, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = nearest(noflash_centers, flash_centers[i], nullptr);
    src.col(i) = flash_centers[i];
    dst.col(i) = noflash_centers[j];
  }

  // Collinear sources leave the rotation about the line unconstrained.
  const Eigen::Vector3d mean = src.rowwise().mean();
  const Eigen::Matrix3Xd centered = src.colwise() - mean;
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(centered * centered.transpose());
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] / sv[0] < 1e-12) {
    throw alignment_unreliable_error(
        "align_clouds: degenerate (collinear) camera centers");
  }

  const Eigen::Matrix4d t = Eigen::umeyama(src, dst, true);
  SimilarityTransform out;
  const Eigen::Matrix3d sr = t.topLeftCorner<3, 3>();
  out.scale = std::cbrt(sr.determinant());
  out.rotation = sr / out.scale;
  out.translation = t.topRightCorner<3, 1>();
  return out;
}

double alignment_residual(const std::vector<Eigen::Vector3d>& flash_centers,
                          const std::vector<Eigen::Vector3d>& noflash_centers,
                          const SimilarityTransform& transform) {
  if (flash_centers.empty() || noflash_centers.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& f : flash_centers) {
    const std::size_t j = nearest(noflash_centers, f, nullptr);
    sum += (transform.apply(f) - noflash_centers[j]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(flash_centers.size()));
}

LabeledPoints classify_points(const SfMPoints& flash_pts_aligned,
                              const SfMPoints& noflash_pts,
                              const ClassifyConfig& config) {
  const SfMPoints flash =
      reorder(flash_pts_aligned, canonical_order(flash_pts_aligned));
  const SfMPoints noflash = reorder(noflash_pts, canonical_order(noflash_pts));

  double radius = config.radius;
  if (radius <= 0.0) radius = 2.0 * median_nn_spacing(noflash.positions);

  LabeledPoints out;
  out.positions.reserve(flash.size() + noflash.size());

  auto push = [&](const Eigen::Vector3d& pos, const Eigen::Vector3d& color,
                  const Eigen::Vector3d& flash_color, PointLabel label) {
    out.positions.push_back(pos);
    out.colors.push_back(color);
    out.flash_colors.push_back(flash_color);
    out.labels.push_back(label);
  };

  for (std::size_t i = 0; i < flash.size(); ++i) {
    double dist = std::numeric_limits<double>::infinity();
    std::size_t j = 0;
    if (!noflash.positions.empty()) {
      j = nearest(noflash.positions, flash.positions[i], &dist);
    }
    if (dist <= radius) {
      const double lum_f = luminance(flash.colors[i]);
      const double lum_n = std::max(luminance(noflash.colors[j]), 1e-12);
      if (lum_f / lum_n >= config.ratio) {
        push(flash.positions[i], noflash.colors[j], flash.colors[i],
             PointLabel::kTransmitted);
      } else {
        push(flash.positions[i], noflash.colors[j], Eigen::Vector3d::Zero(),
             PointLabel::kReflected);
      }
    } else {
      // Flash-visible content with no no-flash counterpart is transmission.
      push(flash.positions[i], flash.colors[i], flash.colors[i],
           PointLabel::kTransmitted);
    }
  }

  for (std::size_t j = 0; j < noflash.size(); ++j) {
    double dist = std::numeric_limits<double>::infinity();
    if (!flash.positions.empty()) {
      nearest(flash.positions, noflash.positions[j], &dist);
    }
    if (dist > radius) {
      push(noflash.positions[j], noflash.colors[j], Eigen::Vector3d::Zero(),
           PointLabel::kReflected);
    }
  }
  return out;
}

namespace {

double mean_knn_distance(const std::vector<Eigen::Vector3d>& pts,
                         std::size_t i, int k) {
  std::vector<double> d2;
  d2.reserve(pts.size() - 1);
  for (std::size_t j = 0; j < pts.size(); ++j) {
    if (j != i) d2.push_back((pts[j] - pts[i]).squaredNorm());
  }
  const int kk = std::min<int>(k, static_cast<int>(d2.size()));
  if (kk <= 0) return 0.0;
  std::partial_sort(d2.begin(), d2.begin() + kk, d2.end());
  double sum = 0.0;
  for (int t = 0; t < kk; ++t) sum += std::sqrt(d2[t]);
  return sum / kk;
}

// Builds one cloud from positions and tone-mapped per-gaussian colors
// (channel count from the colors' column count).
GaussianCloud seed_cloud(const std::vector<Eigen::Vector3d>& positions,
                         const std::vector<Eigen::VectorXd>& tone_colors,
                         int channels, int sh_degree, double opacity_seed) {
  GaussianCloud cloud;
  cloud.channels = channels;
  cloud.sh_degree = sh_degree;
  cloud.gaussians.resize(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    Gaussian3D& g = cloud.gaussians[i];
    g.position = positions[i];
    g.rotation = Eigen::Vector4d(1, 0, 0, 0);
    const double d = std::max(mean_knn_distance(positions, i, 3), 1e-7);
    g.log_scale = Eigen::Vector3d::Constant(std::log(d));
    g.opacity_logit = logit(opacity_seed);
    g.sh = SHCoeffs(sh_degree, channels);
    for (int c = 0; c < channels; ++c) {
      g.sh.dc(c) = sh_dc_from_value(tone_colors[i][c]);
    }
  }
  return cloud;
}

struct Bounds {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(1.0);
};

Bounds bounds_of(const std::vector<Eigen::Vector3d>& pts) {
  Bounds b;
  if (pts.empty()) return b;
  b.lo = b.hi = pts[0];
  for (const auto& p : pts) {
    b.lo = b.lo.cwiseMin(p);
    b.hi = b.hi.cwiseMax(p);
  }
  return b;
}

std::vector<Eigen::Vector3d> random_positions(const Bounds& b, int count,
                                              std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Eigen::Vector3d> out(count);
  for (auto& p : out) {
    for (int k = 0; k < 3; ++k) p[k] = b.lo[k] + u(rng) * (b.hi[k] - b.lo[k]);
  }
  return out;
}

}  // namespace

SceneModel init_scene(const LabeledPoints& labels, const InitConfig& config,
                      InitReport* report) {
  const ToneCurve gamma(config.gamma_exponent);
  std::vector<Eigen::Vector3d> pos_t, pos_r;
  std::vector<Eigen::VectorXd> col_tf, col_tn, col_r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels.labels[i] == PointLabel::kTransmitted) {
      pos_t.push_back(labels.positions[i]);
      Eigen::VectorXd cf(3), cn(3);
      for (int k = 0; k < 3; ++k) {
        cf[k] = gamma.apply(labels.flash_colors[i][k]);
        cn[k] = gamma.apply(labels.colors[i][k]);
      }
      col_tf.push_back(cf);
      col_tn.push_back(cn);
    } else {
      pos_r.push_back(labels.positions[i]);
      Eigen::VectorXd cr(3);
      for (int k = 0; k < 3; ++k) cr[k] = gamma.apply(labels.colors[i][k]);
      col_r.push_back(cr);
    }
  }

  const Bounds bbox = bounds_of(labels.positions);
  std::mt19937_64 rng(config.fallback_seed);
  InitReport rep;
  if (pos_t.empty()) {
    rep.transmitted_fallback = true;
    std::cerr << "init_scene: no transmitted points, random-seeding "
                 "transmission clouds\n";
    pos_t = random_positions(bbox, config.fallback_count, rng);
    const double gray = gamma.apply(0.5);
    col_tf.assign(pos_t.size(), Eigen::VectorXd::Constant(3, gray));
    col_tn.assign(pos_t.size(), Eigen::VectorXd::Constant(3, gray));
  }
  if (pos_r.empty()) {
    rep.reflected_fallback = true;
    std::cerr << "init_scene: no reflected points, random-seeding the "
                 "reflection cloud\n";
    pos_r = random_positions(bbox, config.fallback_count, rng);
    col_r.assign(pos_r.size(), Eigen::VectorXd::Constant(3, gamma.apply(0.5)));
  }
  if (report) *report = rep;

  SceneModel scene;
  scene.mode = config.mode;
  scene.gamma_exponent = config.gamma_exponent;
  if (config.mode == SceneMode::kHardLinear) {
    scene.hard_linear = config.hard_linear_c;
  }

  if (scene.uses_tf_cloud()) {
    scene.t_f = seed_cloud(pos_t, col_tf, 3, config.sh_degree,
                           config.opacity_seed);
  }
  scene.t_n =
      seed_cloud(pos_t, col_tn, 3, config.sh_degree, config.opacity_seed);
  scene.r = seed_cloud(pos_r, col_r, 3, config.sh_degree, config.opacity_seed);

  // A fully opaque seed splat composites to the pre-activation value that
  // squashes to beta_seed: b/(1+b) = beta_seed.
  const double beta_pre = config.beta_seed / (1.0 - config.beta_seed);
  std::vector<Eigen::VectorXd> col_beta(
      pos_t.size(), Eigen::VectorXd::Constant(1, beta_pre));
  scene.beta = seed_cloud(pos_t, col_beta, 1, config.beta_sh_degree,
                          config.opacity_seed);
  return scene;
}

SceneModel init_scene_unlabeled(const SfMPoints& points,
                                const InitConfig& config) {
  const SfMPoints sorted = reorder(points, canonical_order(points));
  const ToneCurve gamma(config.gamma_exponent);
  std::vector<Eigen::VectorXd> col(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    Eigen::VectorXd c(3);
    for (int k = 0; k < 3; ++k) c[k] = gamma.apply(sorted.colors[i][k]);
    col[i] = c;
  }

  SceneModel scene;
  scene.mode = config.mode;
  scene.gamma_exponent = config.gamma_exponent;
  if (config.mode == SceneMode::kHardLinear) {
    scene.hard_linear = config.hard_linear_c;
  }
  scene.t_n = seed_cloud(sorted.positions, col, 3, config.sh_degree,
                         config.opacity_seed);
  if (scene.uses_tf_cloud()) scene.t_f = scene.t_n;
  scene.r = seed_cloud(sorted.positions, col, 3, config.sh_degree,
                       config.opacity_seed);
  const double beta_pre = config.beta_seed / (1.0 - config.beta_seed);
  std::vector<Eigen::VectorXd> col_beta(
      sorted.size(), Eigen::VectorXd::Constant(1, beta_pre));
  scene.beta = seed_cloud(sorted.positions, col_beta, 1, config.beta_sh_degree,
                          config.opacity_seed);
  return scene;
}

}  // namespace beamsplit
