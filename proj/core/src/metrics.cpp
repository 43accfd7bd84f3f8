#include "beamsplit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "beamsplit/errors.hpp"
#include "beamsplit/rasterizer.hpp"
#include "beamsplit/tonemap.hpp"

namespace beamsplit {

using nlohmann::json;

double psnr(const Image& a, const Image& b, double peak) {
  require_same_shape(a, b, "psnr");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(peak * peak / mse));
}

double ssim_mean(const Image& a, const Image& b, const SsimParams& params) {
  return 1.0 - 2.0 * dssim_loss(a, b, params);
}

EvalReport evaluate(const SceneModel& scene, const LoadedDataset& dataset) {
  if (!dataset.has_gt()) {
    throw data_error("evaluate: dataset carries no ground-truth layers");
  }
  const ToneCurve gamma(scene.gamma_exponent);
  const SyntheticScene oracle_scene = build_scene(dataset.spec);

  EvalReport report;
  int n_train = 0, n_holdout = 0;
  for (std::size_t i = 0; i < dataset.captures.views.size(); ++i) {
    const CameraView& view = dataset.captures.views[i];
    const OracleMaps& gt = dataset.gt[i];

    const RenderTarget rt_t = render(scene.t_n, view);
    const RenderTarget rt_r = render(scene.r, view);
    const RenderTarget rt_beta = render(scene.beta, view);

    ViewEval ve;
    ve.view_id = view.view_id;
    ve.holdout = view.holdout;

    const Image gt_t_tone = gamma.apply(gt.t_n);
    ve.psnr_t = psnr(rt_t.color, gt_t_tone);
    ve.ssim_t = ssim_mean(rt_t.color, gt_t_tone);

    // Model reflection contribution beta * gamma^-1(R), tone-mapped.
    Image model_betar(view.intrinsics.width, view.intrinsics.height, 3);
    for (int y = 0; y < model_betar.height(); ++y) {
      for (int x = 0; x < model_betar.width(); ++x) {
        const double bm = beta_activation(rt_beta.color.at(x, y));
        for (int c = 0; c < 3; ++c) {
          const double rraw = std::pow(rt_r.color.at(x, y, c),
                                       1.0 / scene.gamma_exponent);
          model_betar.at(x, y, c) =
              std::pow(std::min(bm * rraw, 1.0), scene.gamma_exponent);
        }
      }
    }
    const Image gt_betar_tone = gamma.apply(gt.beta_r);
    ve.psnr_r = psnr(model_betar, gt_betar_tone);
    ve.ssim_r = ssim_mean(model_betar, gt_betar_tone);

    // Paired flash/no-flash difference protocol: oracle-render the exact
    // pose with and without flash, subtract, undo the alpha scale.
    {
      const OracleMaps with_flash = render_oracle(oracle_scene, view, true);
      const OracleMaps without = render_oracle(oracle_scene, view, false);
      Image ref = paired_subtract(with_flash.image, without.image);
      for (std::size_t k = 0; k < ref.size(); ++k) {
        ref[k] = std::clamp(ref[k] / oracle_scene.alpha, 0.0, 1.0);
      }
      ve.psnr_t_paired = psnr(rt_t.color, gamma.apply(ref));
    }

    if (view.holdout) {
      report.mean_psnr_t_holdout += ve.psnr_t;
      report.mean_ssim_t_holdout += ve.ssim_t;
      ++n_holdout;
    } else {
      report.mean_psnr_t_train += ve.psnr_t;
      report.mean_ssim_t_train += ve.ssim_t;
      report.mean_psnr_r_train += ve.psnr_r;
      report.mean_ssim_r_train += ve.ssim_r;
      report.mean_psnr_t_paired_train += ve.psnr_t_paired;
      ++n_train;
    }
    report.views.push_back(std::move(ve));
  }
  if (n_train > 0) {
    report.mean_psnr_t_train /= n_train;
    report.mean_ssim_t_train /= n_train;
    report.mean_psnr_r_train /= n_train;
    report.mean_ssim_r_train /= n_train;
    report.mean_psnr_t_paired_train /= n_train;
  }
  if (n_holdout > 0) {
    report.mean_psnr_t_holdout /= n_holdout;
    report.mean_ssim_t_holdout /= n_holdout;
  }
  return report;
}

std::string EvalReport::to_json() const {
  json j;
  j["mean"] = {{"psnr_t_train", mean_psnr_t_train},
               {"ssim_t_train", mean_ssim_t_train},
               {"psnr_r_train", mean_psnr_r_train},
               {"ssim_r_train", mean_ssim_r_train},
               {"psnr_t_paired_train", mean_psnr_t_paired_train},
               {"psnr_t_holdout", mean_psnr_t_holdout},
               {"ssim_t_holdout", mean_ssim_t_holdout}};
  j["views"] = json::array();
  for (const auto& v : views) {
    j["views"].push_back({{"view_id", v.view_id},
                          {"holdout", v.holdout},
                          {"psnr_t", v.psnr_t},
                          {"ssim_t", v.ssim_t},
                          {"psnr_r", v.psnr_r},
                          {"ssim_r", v.ssim_r},
                          {"psnr_t_paired", v.psnr_t_paired}});
  }
  return j.dump(2);
}

void save_eval_report(const std::string& path, const EvalReport& report) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open for write: " + path);
  f << report.to_json() << "\n";
}

}  // namespace beamsplit
