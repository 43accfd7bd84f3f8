#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "beamsplit/adam.hpp"
#include "beamsplit/camera.hpp"
#include "beamsplit/losses.hpp"
#include "beamsplit/scene_model.hpp"

namespace beamsplit {

struct TrainConfig {
  int iterations = 2000;
  LearningRates rates;
  int densify_interval = 300;
  double densify_grad_threshold = 5e-6;  // mean 2D positional grad, pixels
  double densify_until_frac = 0.6;       // stop growing after this fraction
  double prune_opacity_threshold = 0.005;
  int max_gaussians = 5000;
  double split_scale_frac = 0.01;  // of scene extent: clone below, split above
  double split_scale_shrink = 1.6;
  LossWeights weights;
  SsimParams ssim;
  std::uint64_t seed = 0;
  int checkpoint_interval = 0;  // 0: final checkpoint only
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  bool valid() const { return iterations >= 0 && max_gaussians >= 1; }
};

std::string train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const std::string& text);
TrainConfig load_train_config(const std::string& path);

/// One epoch's view visitation order: views shuffled per pool with the given
/// RNG, then strictly alternated flash/no-flash while both pools last (the
/// larger pool leads; flash leads ties). Every view appears exactly once.
std::vector<int> schedule_views(const CaptureSet& captures,
                                std::mt19937_64& rng);

/// Accumulated densification statistics of one cloud.
struct DensifyStats {
  std::vector<double> grad_norm_sum;
  std::vector<int> visible_count;

  explicit DensifyStats(std::size_t n)
      : grad_norm_sum(n, 0.0), visible_count(n, 0) {}
  DensifyStats() = default;
  void accumulate(const ParamGradients& grads);
  void reset(std::size_t n);
};

struct DensifyReport {
  int cloned = 0;
  int split = 0;
  int pruned = 0;
};

/// Clone-or-split Gaussians whose mean screen-space positional gradient
/// exceeds the threshold, then prune low-opacity ones. AdamState rows and
/// stats are kept congruent; the cloud never exceeds max_gaussians.
DensifyReport densify_and_prune(GaussianCloud& cloud, AdamState& adam,
                                DensifyStats& stats, const TrainConfig& config,
                                double scene_extent, bool allow_grow,
                                std::mt19937_64& rng);

/// Per-cloud optimizer state for one training run.
struct TrainerState {
  AdamState adam_tf, adam_tn, adam_r, adam_beta;
  DensifyStats stats_tf, stats_tn, stats_r, stats_beta;
  double scene_extent = 1.0;
  bool rates_halved = false;
  int skipped_steps = 0;

  explicit TrainerState(const SceneModel& scene);
};

/// One optimization step at one view: total_loss, one Adam update of every
/// trainable cloud, quaternion renormalization. A non-finite loss or
/// gradient skips the update, logs the incident, and halves the learning
/// rates once for the rest of the run.
LossReport train_step(SceneModel& scene, const CameraView& view,
                      const TrainConfig& config, TrainerState& state);

struct TrainResult {
  int steps_run = 0;
  int skipped_steps = 0;
  std::vector<LossReport> log;  // one entry per step
};

struct TrainOptions {
  std::string log_csv_path;    // per-step CSV log, empty to disable
  std::string checkpoint_dir;  // periodic checkpoints, empty to disable
};

/// Full training loop: schedule_views epochs, periodic densify/prune, and
/// optional checkpoints. Deterministic: identical (config, seed, data)
/// produce bit-identical final scenes.
TrainResult train(SceneModel& scene, const CaptureSet& captures,
                  const TrainConfig& config, const TrainOptions& options = {});

/// Bounding-sphere radius of all cloud positions; the position learning rate
/// and the clone/split size threshold scale with it.
double scene_extent(const SceneModel& scene);

}  // namespace beamsplit
