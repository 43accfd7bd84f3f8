#include "beamsplit/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "beamsplit/errors.hpp"
#include "beamsplit/parallel.hpp"

namespace beamsplit {

namespace {
constexpr double kDepthNormEps = 1e-8;
constexpr int kMaxChannels = 3;
constexpr int kMaxShCoeffs = 12;  // degree 1, 3 channels
}  // namespace

ParamGradients::ParamGradients(const GaussianCloud& cloud)
    : position(cloud.size(), Eigen::Vector3d::Zero()),
      rotation(cloud.size(), Eigen::Vector4d::Zero()),
      log_scale(cloud.size(), Eigen::Vector3d::Zero()),
      opacity_logit(cloud.size(), 0.0),
      sh(cloud.size()),
      mean2d_grad_norm(cloud.size(), 0.0) {
  const std::size_t n_sh =
      static_cast<std::size_t>((cloud.sh_degree + 1) * (cloud.sh_degree + 1)) *
      cloud.channels;
  for (auto& s : sh) s.assign(n_sh, 0.0);
}

void ParamGradients::add_scaled(const ParamGradients& other, double scale) {
  if (position.size() != other.position.size()) {
    throw invalid_gradient_shape_error("ParamGradients::add_scaled size");
  }
  for (std::size_t i = 0; i < position.size(); ++i) {
    position[i] += scale * other.position[i];
    rotation[i] += scale * other.rotation[i];
    log_scale[i] += scale * other.log_scale[i];
    opacity_logit[i] += scale * other.opacity_logit[i];
    for (std::size_t k = 0; k < sh[i].size(); ++k) {
      sh[i][k] += scale * other.sh[i][k];
    }
    mean2d_grad_norm[i] += other.mean2d_grad_norm[i];
  }
}

bool ParamGradients::all_finite() const {
  for (std::size_t i = 0; i < position.size(); ++i) {
    if (!position[i].allFinite() || !rotation[i].allFinite() ||
        !log_scale[i].allFinite() || !std::isfinite(opacity_logit[i])) {
      return false;
    }
    for (double v : sh[i])
      if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

struct SplatRecord {
  std::uint32_t gaussian;
  double depth;            // camera-space z of the mean
  double mean2d[2];
  double inv2d[3];         // Sigma'^-1 as (xx, xy, yy)
  double opacity;          // sigmoid(opacity_logit)
  double color[kMaxChannels];      // SH color clamped at 0
  bool color_pass[kMaxChannels];   // clamp mask for the backward pass
  double dir[3];           // unit view direction camera-center -> mean
  double dir_len;
  double t_cam[3];         // camera-space mean
  bool jac_clamp_x, jac_clamp_y;
  int x0, x1, y0, y1;      // inclusive pixel bounds
  // parameter snapshot for the backward chain
  double quat[4];
  double log_scale[3];
  double sh_coeffs[kMaxShCoeffs];
};

struct Contrib {
  std::uint32_t splat;
  double alpha;   // post-clip alpha used in blending
  double weight;  // alpha * transmittance before this contribution
};

}  // namespace

struct RenderContext {
  Intrinsics intr;
  RigidPose pose;
  Eigen::Vector3d cam_center;
  int channels = 0;
  int sh_degree = 0;
  std::size_t n_gaussians = 0;
  std::vector<SplatRecord> splats;  // culled, sorted front-to-back
  std::vector<std::vector<Contrib>> pixel_contribs;
  std::vector<double> alpha_final;  // accumulated alpha per pixel
  std::vector<double> depth_sum;    // unnormalized depth accumulator
};

RenderTarget render(const GaussianCloud& cloud, const CameraView& view) {
  if (!view.intrinsics.valid() || !view.world_to_cam.valid(1e-6)) {
    throw invalid_parameter_error("render: invalid camera view");
  }
  if (cloud.channels < 1 || cloud.channels > kMaxChannels ||
      cloud.sh_degree < 0 || cloud.sh_degree > 1) {
    throw invalid_parameter_error("render: unsupported cloud layout");
  }
  const Intrinsics& intr = view.intrinsics;
  const int w = intr.width, h = intr.height, ch = cloud.channels;
  const std::size_t n_pix = static_cast<std::size_t>(w) * h;

  auto ctx = std::make_shared<RenderContext>();
  ctx->intr = intr;
  ctx->pose = view.world_to_cam;
  ctx->cam_center = view.world_to_cam.camera_center();
  ctx->channels = ch;
  ctx->sh_degree = cloud.sh_degree;
  ctx->n_gaussians = cloud.size();
  ctx->pixel_contribs.resize(n_pix);
  ctx->alpha_final.assign(n_pix, 0.0);
  ctx->depth_sum.assign(n_pix, 0.0);

  // Project and cull.
  std::vector<SplatRecord> splats;
  splats.reserve(cloud.size());
  for (std::uint32_t i = 0; i < cloud.size(); ++i) {
    const Gaussian3D& g = cloud.gaussians[i];
    const Eigen::Vector3d t = view.world_to_cam.to_camera(g.position);
    if (!(t.z() > kZNear)) continue;

    SplatRecord s{};
    s.gaussian = i;
    s.depth = t.z();
    s.t_cam[0] = t.x();
    s.t_cam[1] = t.y();
    s.t_cam[2] = t.z();
    s.mean2d[0] = intr.fx * t.x() / t.z() + intr.cx;
    s.mean2d[1] = intr.fy * t.y() / t.z() + intr.cy;

    const Eigen::Matrix<double, 2, 3> jac =
        perspective_jacobian(intr, t, &s.jac_clamp_x, &s.jac_clamp_y);
    const Eigen::Matrix3d cov3d =
        covariance_from_params_lenient(g.rotation, g.log_scale);
    const Eigen::Matrix2d cov2d =
        project_covariance(cov3d, view.world_to_cam.rotation, jac);
    const double det =
        cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(0, 1);
    if (!(det > 0.0)) continue;  // dilation guarantees this for finite input
    s.inv2d[0] = cov2d(1, 1) / det;
    s.inv2d[1] = -cov2d(0, 1) / det;
    s.inv2d[2] = cov2d(0, 0) / det;

    const double rx = kSplatCutoffSigma * std::sqrt(cov2d(0, 0));
    const double ry = kSplatCutoffSigma * std::sqrt(cov2d(1, 1));
    s.x0 = std::max(0, static_cast<int>(std::ceil(s.mean2d[0] - rx - 0.5)));
    s.x1 = std::min(w - 1, static_cast<int>(std::floor(s.mean2d[0] + rx - 0.5)));
    s.y0 = std::max(0, static_cast<int>(std::ceil(s.mean2d[1] - ry - 0.5)));
    s.y1 = std::min(h - 1, static_cast<int>(std::floor(s.mean2d[1] + ry - 0.5)));
    if (s.x0 > s.x1 || s.y0 > s.y1) continue;

    Eigen::Vector3d dir = g.position - ctx->cam_center;
    s.dir_len = dir.norm();
    dir /= s.dir_len;
    s.dir[0] = dir.x();
    s.dir[1] = dir.y();
    s.dir[2] = dir.z();
    const Eigen::Vector3d raw = eval_sh(g.sh, dir);
    for (int c = 0; c < ch; ++c) {
      s.color_pass[c] = raw[c] > 0.0;
      s.color[c] = s.color_pass[c] ? raw[c] : 0.0;
    }
    s.opacity = g.activated_opacity();

    for (int k = 0; k < 4; ++k) s.quat[k] = g.rotation[k];
    for (int k = 0; k < 3; ++k) s.log_scale[k] = g.log_scale[k];
    std::copy(g.sh.coeffs.begin(), g.sh.coeffs.end(), s.sh_coeffs);
    splats.push_back(s);
  }

  // Front-to-back order; ties broken by Gaussian index for determinism.
  std::sort(splats.begin(), splats.end(),
            [](const SplatRecord& a, const SplatRecord& b) {
              if (a.depth != b.depth) return a.depth < b.depth;
              return a.gaussian < b.gaussian;
            });
  ctx->splats = std::move(splats);

  RenderTarget target;
  target.color = Image(w, h, ch);
  target.depth = Image(w, h, 1);
  target.alpha = Image(w, h, 1);

  std::vector<double> transmittance(n_pix, 1.0);

  parallel_chunks(kRenderChunks, [&](int chunk) {
    const auto [r0, r1] = chunk_rows(h, chunk, kRenderChunks);
    if (r0 >= r1) return;
    for (std::uint32_t si = 0; si < ctx->splats.size(); ++si) {
      const SplatRecord& s = ctx->splats[si];
      const int ya = std::max(s.y0, r0), yb = std::min(s.y1, r1 - 1);
      for (int y = ya; y <= yb; ++y) {
        for (int x = s.x0; x <= s.x1; ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * w + x;
          double& tr = transmittance[p];
          if (tr <= kTransmittanceStop) continue;
          const double dx = (x + 0.5) - s.mean2d[0];
          const double dy = (y + 0.5) - s.mean2d[1];
          const double power =
              -0.5 * (s.inv2d[0] * dx * dx + 2.0 * s.inv2d[1] * dx * dy +
                      s.inv2d[2] * dy * dy);
          if (power < -0.5 * kSplatCutoffSigma * kSplatCutoffSigma) continue;
          const double gval = power < 0.0 ? std::exp(power) : 1.0;
          double alpha = s.opacity * gval;
          if (alpha < kAlphaMin) continue;
          if (alpha > kAlphaMax) alpha = kAlphaMax;
          const double weight = alpha * tr;
          double* col = &target.color.at(x, y, 0);
          for (int c = 0; c < ch; ++c) col[c] += s.color[c] * weight;
          ctx->alpha_final[p] += weight;
          ctx->depth_sum[p] += s.depth * weight;
          ctx->pixel_contribs[p].push_back({si, alpha, weight});
          tr *= (1.0 - alpha);
        }
      }
    }
    for (int y = r0; y < r1; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        target.alpha.at(x, y) = ctx->alpha_final[p];
        target.depth.at(x, y) =
            ctx->depth_sum[p] / std::max(ctx->alpha_final[p], kDepthNormEps);
      }
    }
  });

  target.ctx = std::move(ctx);
  return target;
}

namespace {

// Per-splat accumulator filled during the per-pixel stage of the backward
// pass: color (up to 3), opacity-logit, mean2d (2), symmetric 2x2 conic
// gradient (3), and depth-z, 10 doubles per splat.
constexpr int kAccStride = 10;

void backward_pixel_stage(const RenderContext& ctx, const Image& dL_dcolor,
                          const Image& dL_ddepth, int r0, int r1,
                          double* acc) {
  const int w = ctx.intr.width;
  const int ch = ctx.channels;
  const bool has_depth = !dL_ddepth.empty();
  for (int y = r0; y < r1; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      const auto& list = ctx.pixel_contribs[p];
      if (list.empty()) continue;

      double g_col[kMaxChannels] = {0, 0, 0};
      bool any = false;
      for (int c = 0; c < ch; ++c) {
        g_col[c] = dL_dcolor.at(x, y, c);
        any = any || g_col[c] != 0.0;
      }
      const double g_depth = has_depth ? dL_ddepth.at(x, y) : 0.0;
      if (!any && g_depth == 0.0) continue;

      const double a_final = ctx.alpha_final[p];
      const double denom = std::max(a_final, kDepthNormEps);
      const double g_dsum = g_depth / denom;
      const double g_alpha_map =
          (a_final > kDepthNormEps)
              ? -g_depth * ctx.depth_sum[p] / (a_final * a_final)
              : 0.0;

      double acc_c[kMaxChannels] = {0, 0, 0};
      double acc_a = 0.0, acc_z = 0.0;
      for (auto it = list.rbegin(); it != list.rend(); ++it) {
        const SplatRecord& s = ctx.splats[it->splat];
        const double alpha = it->alpha;
        const double weight = it->weight;
        const double t_before = weight / alpha;
        const double inv_one_minus = 1.0 / (1.0 - alpha);
        double* a = acc + static_cast<std::size_t>(it->splat) * kAccStride;

        double d_alpha = 0.0;
        for (int c = 0; c < ch; ++c) {
          a[c] += weight * g_col[c];
          d_alpha += g_col[c] * (s.color[c] * t_before - acc_c[c] * inv_one_minus);
        }
        d_alpha += g_alpha_map * (t_before - acc_a * inv_one_minus);
        d_alpha += g_dsum * (s.depth * t_before - acc_z * inv_one_minus);
        a[9] += g_dsum * weight;  // d(depth_sum)/d(z)

        for (int c = 0; c < ch; ++c) acc_c[c] += s.color[c] * weight;
        acc_a += weight;
        acc_z += s.depth * weight;

        // alpha = opacity * exp(power); clipped contributions carry no
        // gradient through alpha.
        const double dx = (x + 0.5) - s.mean2d[0];
        const double dy = (y + 0.5) - s.mean2d[1];
        const double power =
            -0.5 * (s.inv2d[0] * dx * dx + 2.0 * s.inv2d[1] * dx * dy +
                    s.inv2d[2] * dy * dy);
        const double gval = power < 0.0 ? std::exp(power) : 1.0;
        if (s.opacity * gval > kAlphaMax) continue;

        a[3] += d_alpha * gval * s.opacity * (1.0 - s.opacity);
        const double g_power = d_alpha * s.opacity * gval;
        const double mdx = s.inv2d[0] * dx + s.inv2d[1] * dy;
        const double mdy = s.inv2d[1] * dx + s.inv2d[2] * dy;
        a[4] += g_power * mdx;
        a[5] += g_power * mdy;
        a[6] += g_power * (-0.5) * dx * dx;
        a[7] += g_power * (-0.5) * dx * dy;
        a[8] += g_power * (-0.5) * dy * dy;
      }
    }
  }
}

void backward_splat_stage(const RenderContext& ctx,
                          const std::vector<std::vector<double>>& chunk_acc,
                          std::uint32_t s_begin, std::uint32_t s_end,
                          ParamGradients& grads) {
  const Intrinsics& intr = ctx.intr;
  const int ch = ctx.channels;
  SHCoeffs sh_tmp(ctx.sh_degree, ch);

  for (std::uint32_t si = s_begin; si < s_end; ++si) {
    const SplatRecord& s = ctx.splats[si];

    double acc[kAccStride] = {0};
    for (const auto& buf : chunk_acc) {
      const double* a = buf.data() + static_cast<std::size_t>(si) * kAccStride;
      for (int k = 0; k < kAccStride; ++k) acc[k] += a[k];
    }

    const std::uint32_t gi = s.gaussian;
    const Eigen::Vector4d q(s.quat[0], s.quat[1], s.quat[2], s.quat[3]);
    const Eigen::Vector3d ls(s.log_scale[0], s.log_scale[1], s.log_scale[2]);
    const Eigen::Vector3d t(s.t_cam[0], s.t_cam[1], s.t_cam[2]);

    grads.opacity_logit[gi] += acc[3];

    // Conic gradient -> screen covariance: dSigma' = -M * gM * M.
    const Eigen::Matrix2d m_inv{{s.inv2d[0], s.inv2d[1]},
                                {s.inv2d[1], s.inv2d[2]}};
    const Eigen::Matrix2d g_m{{acc[6], acc[7]}, {acc[7], acc[8]}};
    const Eigen::Matrix2d g_cov2d = -m_inv * g_m * m_inv;

    // Screen covariance -> world covariance and Jacobian.
    const Eigen::Matrix<double, 2, 3> jac =
        perspective_jacobian(intr, t, nullptr, nullptr);
    const Eigen::Matrix3d cov3d = covariance_from_params_lenient(q, ls);
    const Eigen::Matrix<double, 2, 3> jw = jac * ctx.pose.rotation;
    const Eigen::Matrix3d g_cov3d = jw.transpose() * g_cov2d * jw;
    const Eigen::Matrix3d p_cam =
        ctx.pose.rotation * cov3d * ctx.pose.rotation.transpose();
    const Eigen::Matrix<double, 2, 3> g_jac = 2.0 * g_cov2d * jac * p_cam;

    Eigen::Vector4d g_q = Eigen::Vector4d::Zero();
    Eigen::Vector3d g_ls = Eigen::Vector3d::Zero();
    covariance_from_params_backward(q, ls, g_cov3d, g_q, g_ls);
    grads.rotation[gi] += g_q;
    grads.log_scale[gi] += g_ls;

    // Camera-space gradient of the mean: projection, Jacobian, and depth.
    Eigen::Vector3d g_t = Eigen::Vector3d::Zero();
    const double inv_z = 1.0 / t.z();
    const double gx = acc[4], gy = acc[5];
    g_t.x() += gx * intr.fx * inv_z;
    g_t.y() += gy * intr.fy * inv_z;
    g_t.z() += -(gx * intr.fx * t.x() + gy * intr.fy * t.y()) * inv_z * inv_z;
    g_t.z() += acc[9];

    const double limx = 1.3 * (0.5 * intr.width / intr.fx);
    const double limy = 1.3 * (0.5 * intr.height / intr.fy);
    const double uc = std::clamp(t.x() * inv_z, -limx, limx);
    const double vc = std::clamp(t.y() * inv_z, -limy, limy);
    g_t.z() += g_jac(0, 0) * (-intr.fx * inv_z * inv_z) +
               g_jac(1, 1) * (-intr.fy * inv_z * inv_z);
    if (s.jac_clamp_x) {
      g_t.z() += g_jac(0, 2) * (intr.fx * uc * inv_z * inv_z);
    } else {
      g_t.x() += g_jac(0, 2) * (-intr.fx * inv_z * inv_z);
      g_t.z() += g_jac(0, 2) * (2.0 * intr.fx * t.x() * inv_z * inv_z * inv_z);
    }
    if (s.jac_clamp_y) {
      g_t.z() += g_jac(1, 2) * (intr.fy * vc * inv_z * inv_z);
    } else {
      g_t.y() += g_jac(1, 2) * (-intr.fy * inv_z * inv_z);
      g_t.z() += g_jac(1, 2) * (2.0 * intr.fy * t.y() * inv_z * inv_z * inv_z);
    }

    Eigen::Vector3d g_pos = ctx.pose.rotation.transpose() * g_t;

    // Color -> SH coefficients and view direction.
    Eigen::Vector3d g_color_val = Eigen::Vector3d::Zero();
    bool any_color = false;
    for (int c = 0; c < ch; ++c) {
      if (s.color_pass[c] && acc[c] != 0.0) {
        g_color_val[c] = acc[c];
        any_color = true;
      }
    }
    if (any_color) {
      std::copy(s.sh_coeffs, s.sh_coeffs + sh_tmp.size(),
                sh_tmp.coeffs.begin());
      const Eigen::Vector3d dir(s.dir[0], s.dir[1], s.dir[2]);
      Eigen::Vector3d g_dir = Eigen::Vector3d::Zero();
      eval_sh_backward(sh_tmp, dir, g_color_val, grads.sh[gi].data(),
                       ctx.sh_degree >= 1 ? &g_dir : nullptr);
      if (ctx.sh_degree >= 1) {
        g_pos += (g_dir - dir * dir.dot(g_dir)) / s.dir_len;
      }
    }

    grads.position[gi] += g_pos;
    grads.mean2d_grad_norm[gi] += std::sqrt(gx * gx + gy * gy);
  }
}

}  // namespace

ParamGradients render_backward(const RenderContext& ctx,
                               const Image& dL_dcolor, const Image& dL_ddepth) {
  const int w = ctx.intr.width, h = ctx.intr.height;
  if (dL_dcolor.width() != w || dL_dcolor.height() != h ||
      dL_dcolor.channels() != ctx.channels) {
    throw invalid_gradient_shape_error("render_backward: dL_dcolor shape");
  }
  if (!dL_ddepth.empty() &&
      (dL_ddepth.width() != w || dL_ddepth.height() != h ||
       dL_ddepth.channels() != 1)) {
    throw invalid_gradient_shape_error("render_backward: dL_ddepth shape");
  }

  ParamGradients grads;
  grads.position.assign(ctx.n_gaussians, Eigen::Vector3d::Zero());
  grads.rotation.assign(ctx.n_gaussians, Eigen::Vector4d::Zero());
  grads.log_scale.assign(ctx.n_gaussians, Eigen::Vector3d::Zero());
  grads.opacity_logit.assign(ctx.n_gaussians, 0.0);
  grads.sh.assign(ctx.n_gaussians,
                  std::vector<double>(
                      static_cast<std::size_t>((ctx.sh_degree + 1) *
                                               (ctx.sh_degree + 1)) *
                          ctx.channels,
                      0.0));
  grads.mean2d_grad_norm.assign(ctx.n_gaussians, 0.0);

  if (ctx.splats.empty()) return grads;

  std::vector<std::vector<double>> chunk_acc(kRenderChunks);
  for (auto& buf : chunk_acc) {
    buf.assign(ctx.splats.size() * kAccStride, 0.0);
  }
  parallel_chunks(kRenderChunks, [&](int chunk) {
    const auto [r0, r1] = chunk_rows(h, chunk, kRenderChunks);
    if (r0 >= r1) return;
    backward_pixel_stage(ctx, dL_dcolor, dL_ddepth, r0, r1,
                         chunk_acc[chunk].data());
  });

  const std::uint32_t n_splats = static_cast<std::uint32_t>(ctx.splats.size());
  parallel_chunks(kRenderChunks, [&](int chunk) {
    const std::uint32_t a =
        static_cast<std::uint32_t>(static_cast<std::uint64_t>(n_splats) *
                                   chunk / kRenderChunks);
    const std::uint32_t b =
        static_cast<std::uint32_t>(static_cast<std::uint64_t>(n_splats) *
                                   (chunk + 1) / kRenderChunks);
    backward_splat_stage(ctx, chunk_acc, a, b, grads);
  });

  return grads;
}

}  // namespace beamsplit
