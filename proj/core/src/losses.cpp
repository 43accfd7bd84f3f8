#include "beamsplit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "beamsplit/errors.hpp"
#include "beamsplit/tonemap.hpp"

namespace beamsplit {

double l1_loss(const Image& a, const Image& b) {
  return l1_loss_with_grad(a, b, nullptr);
}

double l1_loss_with_grad(const Image& a, const Image& b, Image* grad_a) {
  require_same_shape(a, b, "l1_loss");
  if (grad_a) *grad_a = Image(a.width(), a.height(), a.channels());
  const double inv_n = 1.0 / static_cast<double>(a.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += std::abs(d);
    if (grad_a) (*grad_a)[i] = (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) * inv_n;
  }
  return sum * inv_n;
}

namespace {

// Separable same-mode filtering with a normalized 1D Gaussian kernel; only
// positions with a fully interior window are consumed downstream.
void filter_separable(const Image& in, const std::vector<double>& k,
                      Image& out) {
  const int w = in.width(), h = in.height(), ch = in.channels();
  const int r = static_cast<int>(k.size()) / 2;
  Image tmp(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double s = 0.0;
        const int a = std::max(0, x - r), b = std::min(w - 1, x + r);
        for (int xx = a; xx <= b; ++xx) s += k[xx - x + r] * in.at(xx, y, c);
        tmp.at(x, y, c) = s;
      }
    }
  }
  out = Image(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double s = 0.0;
        const int a = std::max(0, y - r), b = std::min(h - 1, y + r);
        for (int yy = a; yy <= b; ++yy) s += k[yy - y + r] * tmp.at(x, yy, c);
        out.at(x, y, c) = s;
      }
    }
  }
}

std::vector<double> gaussian_kernel(int window, double sigma) {
  std::vector<double> k(window);
  const int r = window / 2;
  double sum = 0.0;
  for (int i = 0; i < window; ++i) {
    const double d = i - r;
    k[i] = std::exp(-0.5 * d * d / (sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

int effective_window(const Image& a, const SsimParams& p) {
  int win = std::min(p.window, std::min(a.width(), a.height()));
  if (win % 2 == 0) --win;
  return std::max(win, 1);
}

}  // namespace

double dssim_loss(const Image& a, const Image& b, const SsimParams& params) {
  return dssim_loss_with_grad(a, b, params, nullptr);
}

double dssim_loss_with_grad(const Image& a, const Image& b,
                            const SsimParams& params, Image* grad_a) {
  require_same_shape(a, b, "dssim_loss");
  const int w = a.width(), h = a.height(), ch = a.channels();
  const int win = effective_window(a, params);
  const int r = win / 2;
  const double c1 = (params.k1 * params.dynamic_range) *
                    (params.k1 * params.dynamic_range);
  const double c2 = (params.k2 * params.dynamic_range) *
                    (params.k2 * params.dynamic_range);
  const std::vector<double> k1d = gaussian_kernel(win, params.sigma);

  Image mu_a, mu_b, e_aa, e_bb, e_ab;
  {
    Image aa(w, h, ch), bb(w, h, ch), ab(w, h, ch);
    for (std::size_t i = 0; i < a.size(); ++i) {
      aa[i] = a[i] * a[i];
      bb[i] = b[i] * b[i];
      ab[i] = a[i] * b[i];
    }
    filter_separable(a, k1d, mu_a);
    filter_separable(b, k1d, mu_b);
    filter_separable(aa, k1d, e_aa);
    filter_separable(bb, k1d, e_bb);
    filter_separable(ab, k1d, e_ab);
  }

  const int x0 = r, x1 = w - 1 - r, y0 = r, y1 = h - 1 - r;
  const std::size_t n_valid =
      static_cast<std::size_t>(x1 - x0 + 1) * (y1 - y0 + 1) * ch;
  if (grad_a) *grad_a = Image(w, h, ch);

  // d(dssim)/d(ssim_p) for the mean over valid windows.
  const double g_up = -0.5 / static_cast<double>(n_valid);

  double ssim_sum = 0.0;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      for (int c = 0; c < ch; ++c) {
        const double ma = mu_a.at(x, y, c), mb = mu_b.at(x, y, c);
        const double va = e_aa.at(x, y, c) - ma * ma;
        const double vb = e_bb.at(x, y, c) - mb * mb;
        const double vab = e_ab.at(x, y, c) - ma * mb;
        const double a1 = 2 * ma * mb + c1, a2 = 2 * vab + c2;
        const double b1 = ma * ma + mb * mb + c1, b2 = va + vb + c2;
        const double s = (a1 * a2) / (b1 * b2);
        ssim_sum += s;
        if (!grad_a) continue;
        const double f1 = 2.0 * (mb * a2 - ma * s * b2) / (b1 * b2);
        const double f2 = -2.0 * s / b2;
        const double f3 = 2.0 * a1 / (b1 * b2);
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            const double wgt = k1d[dx + r] * k1d[dy + r];
            const int qx = x + dx, qy = y + dy;
            (*grad_a).at(qx, qy, c) +=
                wgt * g_up *
                (f1 + f2 * (a.at(qx, qy, c) - ma) + f3 * (b.at(qx, qy, c) - mb));
          }
        }
      }
    }
  }
  const double mssim = ssim_sum / static_cast<double>(n_valid);
  return (1.0 - mssim) / 2.0;
}

double pearson_linearity_loss(const Image& t_n, const Image& t_f) {
  return pearson_linearity_loss_with_grad(t_n, t_f, nullptr, nullptr);
}

double pearson_linearity_loss_with_grad(const Image& t_n, const Image& t_f,
                                        Image* grad_tn, Image* grad_tf) {
  require_same_shape(t_n, t_f, "pearson_linearity_loss");
  const std::size_t n = t_n.size();
  if (n < 2) {
    throw invalid_parameter_error("pearson_linearity_loss: need >= 2 samples");
  }
  if (grad_tn) *grad_tn = Image(t_n.width(), t_n.height(), t_n.channels());
  if (grad_tf) *grad_tf = Image(t_f.width(), t_f.height(), t_f.channels());

  double mean_n = 0.0, mean_f = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_n += t_n[i];
    mean_f += t_f[i];
  }
  mean_n /= static_cast<double>(n);
  mean_f /= static_cast<double>(n);
  double s_nn = 0.0, s_ff = 0.0, s_nf = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double an = t_n[i] - mean_n;
    const double af = t_f[i] - mean_f;
    s_nn += an * an;
    s_ff += af * af;
    s_nf += an * af;
  }
  const double var_n = s_nn / static_cast<double>(n);
  const double var_f = s_ff / static_cast<double>(n);
  if (var_n < kPearsonVarEps || var_f < kPearsonVarEps) return 0.0;

  const double denom = std::sqrt(s_nn * s_ff);
  const double loss = -s_nf / denom;
  if (grad_tn || grad_tf) {
    for (std::size_t i = 0; i < n; ++i) {
      const double an = t_n[i] - mean_n;
      const double af = t_f[i] - mean_f;
      if (grad_tn) (*grad_tn)[i] = -(af - (s_nf / s_nn) * an) / denom;
      if (grad_tf) (*grad_tf)[i] = -(an - (s_nf / s_ff) * af) / denom;
    }
  }
  return loss;
}

double depth_smoothness_loss(const Image& depth, const Image& guide) {
  return depth_smoothness_loss_with_grad(depth, guide, nullptr);
}

double depth_smoothness_loss_with_grad(const Image& depth, const Image& guide,
                                       Image* grad_depth) {
  if (depth.channels() != 1 || guide.channels() != 1 ||
      !depth.same_plane(guide)) {
    throw shape_mismatch_error("depth_smoothness_loss: H x W maps required");
  }
  const int w = depth.width(), h = depth.height();
  if (grad_depth) *grad_depth = Image(w, h, 1);
  const double inv_n = 1.0 / (static_cast<double>(w) * h);
  double sum = 0.0;
  auto accumulate = [&](int x, int y, int nx, int ny) {
    const double dd = depth.at(nx, ny) - depth.at(x, y);
    const double dg = guide.at(nx, ny) - guide.at(x, y);
    const double wgt = std::exp(-std::abs(dg) / kDepthGuideTau);
    sum += std::abs(dd) * wgt;
    if (grad_depth) {
      const double sgn = dd > 0 ? 1.0 : (dd < 0 ? -1.0 : 0.0);
      (*grad_depth).at(nx, ny) += sgn * wgt * inv_n;
      (*grad_depth).at(x, y) -= sgn * wgt * inv_n;
    }
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x + 1 < w; ++x) accumulate(x, y, x + 1, y);
  for (int y = 0; y + 1 < h; ++y)
    for (int x = 0; x < w; ++x) accumulate(x, y, x, y + 1);
  return sum * inv_n;
}

namespace {

void axpy(Image& dst, const Image& src, double scale) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

}  // namespace

TotalLossResult total_loss(const SceneModel& scene, const CameraView& view,
                           const LossWeights& weights,
                           const SsimParams& ssim_params, bool with_gradients) {
  if (!view.has_image()) {
    throw invalid_parameter_error("total_loss: view carries no captured image");
  }
  const ToneCurve gamma(scene.gamma_exponent);
  const Image target = gamma.apply(view.image);

  TotalLossResult result;
  result.composite = render_composite(scene, view);
  CompositeRender& cr = result.composite;

  // Pseudo-pair images at this pose. The active transmission render is
  // shared with the composite; only full mode needs the second render.
  RenderTarget rt_other;
  Image img_f, img_n;
  const bool linearity_active = scene.mode != SceneMode::kFlashless;
  if (scene.mode == SceneMode::kFull) {
    rt_other = render(view.flash ? scene.t_n : scene.t_f, view);
    if (view.flash) {
      img_f = cr.transmission;
      img_n = rt_other.color;
    } else {
      img_f = rt_other.color;
      img_n = cr.transmission;
    }
  } else if (scene.mode == SceneMode::kHardLinear) {
    img_n = cr.rt_t.color;
    img_f = img_n;
    const double scale = std::pow(*scene.hard_linear, scene.gamma_exponent);
    for (std::size_t i = 0; i < img_f.size(); ++i) img_f[i] *= scale;
  }

  Image d_composite, g_pair_n, g_pair_f, g_depth_r;
  LossReport& rep = result.report;
  rep.l1 = l1_loss_with_grad(cr.composite, target,
                             with_gradients ? &d_composite : nullptr);
  Image d_comp_ssim;
  rep.dssim = dssim_loss_with_grad(cr.composite, target, ssim_params,
                                   with_gradients ? &d_comp_ssim : nullptr);
  rep.linearity =
      linearity_active
          ? pearson_linearity_loss_with_grad(
                img_n, img_f, with_gradients ? &g_pair_n : nullptr,
                with_gradients ? &g_pair_f : nullptr)
          : 0.0;
  const Image guide = target.channel_mean();
  rep.depth = depth_smoothness_loss_with_grad(
      cr.depth_r, guide, with_gradients ? &g_depth_r : nullptr);
  rep.total = weights.l1 * rep.l1 + weights.dssim * rep.dssim +
              weights.linearity * rep.linearity + weights.depth * rep.depth;

  if (!with_gradients) return result;

  // d(total)/d(composite map), then back through the image formation.
  Image d_comp_total(d_composite.width(), d_composite.height(),
                     d_composite.channels());
  axpy(d_comp_total, d_composite, weights.l1);
  axpy(d_comp_total, d_comp_ssim, weights.dssim);
  const CompositeColorGrads cg = composite_backward(cr, d_comp_total);

  // Gradients w.r.t. the stored transmission render's color map.
  Image d_t_color = cg.d_t;
  Image d_other_color;
  if (linearity_active && scene.mode == SceneMode::kFull) {
    const Image& g_active = view.flash ? g_pair_f : g_pair_n;
    const Image& g_other = view.flash ? g_pair_n : g_pair_f;
    axpy(d_t_color, g_active, weights.linearity);
    d_other_color = Image(g_other.width(), g_other.height(),
                          g_other.channels());
    axpy(d_other_color, g_other, weights.linearity);
  } else if (linearity_active && scene.mode == SceneMode::kHardLinear) {
    const double scale = std::pow(*scene.hard_linear, scene.gamma_exponent);
    axpy(d_t_color, g_pair_n, weights.linearity);
    axpy(d_t_color, g_pair_f, weights.linearity * scale);
  }

  Image d_depth_r(g_depth_r.width(), g_depth_r.height(), 1);
  axpy(d_depth_r, g_depth_r, weights.depth);

  const Image no_depth_grad;
  SceneGradients& g = result.grads;
  ParamGradients active_grads =
      render_backward(*cr.rt_t.ctx, d_t_color, no_depth_grad);
  if (scene.mode == SceneMode::kFull) {
    ParamGradients other_grads =
        render_backward(*rt_other.ctx, d_other_color, no_depth_grad);
    if (view.flash) {
      g.t_f = std::move(active_grads);
      g.t_n = std::move(other_grads);
    } else {
      g.t_n = std::move(active_grads);
      g.t_f = std::move(other_grads);
    }
  } else {
    g.t_n = std::move(active_grads);
  }
  g.r = render_backward(*cr.rt_r.ctx, cg.d_r, d_depth_r);
  g.beta = render_backward(*cr.rt_beta.ctx, cg.d_beta, no_depth_grad);
  return result;
}

}  // namespace beamsplit
