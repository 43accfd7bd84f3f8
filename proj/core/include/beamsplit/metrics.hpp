#pragma once

#include <string>
#include <vector>

#include "beamsplit/dataset.hpp"
#include "beamsplit/losses.hpp"
#include "beamsplit/scene_model.hpp"

namespace beamsplit {

/// 10 log10(peak^2 / MSE), capped at 99 dB for (near-)exact matches.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Mean SSIM over interior windows; 1 - 2 * dssim_loss.
double ssim_mean(const Image& a, const Image& b, const SsimParams& params = {});

struct ViewEval {
  std::string view_id;
  bool holdout = false;
  double psnr_t = 0;         // T_N render vs ground-truth T_N layer
  double ssim_t = 0;
  double psnr_r = 0;         // beta*R of the model vs ground-truth beta*R
  double ssim_r = 0;
  double psnr_t_paired = 0;  // T_N render vs paired-subtraction reference
};

/// Per-layer metrics against ground truth plus the paired-subtraction
/// protocol, per view and averaged over the train/holdout splits. All
/// comparisons happen in the tone-mapped domain.
struct EvalReport {
  std::vector<ViewEval> views;
  double mean_psnr_t_train = 0;
  double mean_ssim_t_train = 0;
  double mean_psnr_r_train = 0;
  double mean_ssim_r_train = 0;
  double mean_psnr_t_paired_train = 0;
  double mean_psnr_t_holdout = 0;
  double mean_ssim_t_holdout = 0;

  std::string to_json() const;
};

EvalReport evaluate(const SceneModel& scene, const LoadedDataset& dataset);
void save_eval_report(const std::string& path, const EvalReport& report);

}  // namespace beamsplit
