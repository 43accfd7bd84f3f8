#include <doctest.h>

#include <random>

#include "beamsplit/trainer.hpp"
#include "support/test_scenes.hpp"

using namespace beamsplit;
using namespace beamsplit::testing;

namespace {

CaptureSet make_capture_set(int n_flash, int n_noflash) {
  CaptureSet set;
  std::mt19937_64 rng(1);
  for (int i = 0; i < n_flash + n_noflash; ++i) {
    CameraView v = make_test_view(12, 12, i < n_flash);
    v.view_id = "v" + std::to_string(i);
    v.image = make_random_capture(rng, 12, 12);
    set.views.push_back(v);
  }
  return set;
}

bool clouds_equal(const GaussianCloud& a, const GaussianCloud& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.gaussians[i].position != b.gaussians[i].position) return false;
    if (a.gaussians[i].rotation != b.gaussians[i].rotation) return false;
    if (a.gaussians[i].log_scale != b.gaussians[i].log_scale) return false;
    if (a.gaussians[i].opacity_logit != b.gaussians[i].opacity_logit)
      return false;
    if (a.gaussians[i].sh.coeffs != b.gaussians[i].sh.coeffs) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("schedule alternates strictly with equal pools") {
  CaptureSet set = make_capture_set(2, 2);
  std::mt19937_64 rng(3);
  const auto order = schedule_views(set, rng);
  REQUIRE(order.size() == 4);
  CHECK(set.views[order[0]].flash);
  CHECK_FALSE(set.views[order[1]].flash);
  CHECK(set.views[order[2]].flash);
  CHECK_FALSE(set.views[order[3]].flash);
}

TEST_CASE("schedule visits every view once with unbalanced pools") {
  CaptureSet set = make_capture_set(3, 1);
  std::mt19937_64 rng(4);
  const auto order = schedule_views(set, rng);
  REQUIRE(order.size() == 4);
  CHECK(set.views[order[0]].flash);
  CHECK_FALSE(set.views[order[1]].flash);
  CHECK(set.views[order[2]].flash);
  CHECK(set.views[order[3]].flash);
  std::vector<int> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("schedule is deterministic under the seed") {
  CaptureSet set = make_capture_set(4, 4);
  std::mt19937_64 a(99), b(99);
  CHECK(schedule_views(set, a) == schedule_views(set, b));
}

TEST_CASE("no three consecutive views share a flash flag") {
  CaptureSet set = make_capture_set(5, 4);
  std::mt19937_64 rng(7);
  for (int epoch = 0; epoch < 5; ++epoch) {
    const auto order = schedule_views(set, rng);
    for (std::size_t i = 2; i < order.size(); ++i) {
      const bool f0 = set.views[order[i - 2]].flash;
      const bool f1 = set.views[order[i - 1]].flash;
      const bool f2 = set.views[order[i]].flash;
      const bool all_same = (f0 == f1) && (f1 == f2);
      CHECK_FALSE(all_same);
    }
  }
}

TEST_CASE("zero learning rates leave parameters unchanged") {
  std::mt19937_64 rng(11);
  CameraView view = make_test_view(12, 12, true);
  view.image = make_random_capture(rng, 12, 12);
  SceneModel scene = make_random_scene(rng, 6, view);
  const SceneModel before = scene;

  TrainConfig config;
  config.rates = {0, 0, 0, 0, 0};
  TrainerState state(scene);
  const LossReport rep = train_step(scene, view, config, state);
  CHECK(std::isfinite(rep.total));
  CHECK(clouds_equal(scene.t_n, before.t_n));
  CHECK(clouds_equal(scene.t_f, before.t_f));
  CHECK(clouds_equal(scene.r, before.r));
  CHECK(clouds_equal(scene.beta, before.beta));
}

TEST_CASE("identical steps from identical state give identical deltas") {
  std::mt19937_64 rng(12);
  CameraView view = make_test_view(12, 12, true);
  view.image = make_random_capture(rng, 12, 12);
  SceneModel scene_a = make_random_scene(rng, 6, view);
  SceneModel scene_b = scene_a;

  TrainConfig config;
  TrainerState state_a(scene_a);
  TrainerState state_b(scene_b);
  train_step(scene_a, view, config, state_a);
  train_step(scene_b, view, config, state_b);
  CHECK(clouds_equal(scene_a.t_n, scene_b.t_n));
  CHECK(clouds_equal(scene_a.t_f, scene_b.t_f));
  CHECK(clouds_equal(scene_a.r, scene_b.r));
  CHECK(clouds_equal(scene_a.beta, scene_b.beta));
}

TEST_CASE("densify_and_prune no-op below thresholds") {
  std::mt19937_64 rng(13);
  CameraView view = make_test_view(12, 12, true);
  SceneModel scene = make_random_scene(rng, 8, view);
  GaussianCloud cloud = scene.t_n;
  AdamState adam(cloud);
  DensifyStats stats(cloud.size());
  TrainConfig config;
  std::mt19937_64 drng(1);
  const DensifyReport rep =
      densify_and_prune(cloud, adam, stats, config, 1.0, true, drng);
  CHECK(rep.cloned == 0);
  CHECK(rep.split == 0);
  CHECK(rep.pruned == 0);
  CHECK(clouds_equal(cloud, scene.t_n));
}

TEST_CASE("one small Gaussian above threshold is cloned") {
  std::mt19937_64 rng(14);
  CameraView view = make_test_view(12, 12, true);
  SceneModel scene = make_random_scene(rng, 8, view);
  GaussianCloud cloud = scene.t_n;
  // Make every Gaussian small relative to the split threshold.
  for (auto& g : cloud.gaussians) {
    g.log_scale = Eigen::Vector3d::Constant(std::log(0.004));
  }
  AdamState adam(cloud);
  DensifyStats stats(cloud.size());
  stats.grad_norm_sum[3] = 1.0;
  stats.visible_count[3] = 1;
  TrainConfig config;
  config.densify_grad_threshold = 0.5;
  std::mt19937_64 drng(1);
  const std::size_t before = cloud.size();
  const DensifyReport rep =
      densify_and_prune(cloud, adam, stats, config, 1.0, true, drng);
  CHECK(rep.cloned == 1);
  CHECK(rep.split == 0);
  CHECK(cloud.size() == before + 1);
  CHECK(adam.congruent_with(cloud));
  // The clone copies the original parameters exactly.
  CHECK(cloud.gaussians.back().position == scene.t_n.gaussians[3].position);
}

TEST_CASE("large Gaussians split and originals are removed") {
  std::mt19937_64 rng(15);
  CameraView view = make_test_view(12, 12, true);
  SceneModel scene = make_random_scene(rng, 6, view);
  GaussianCloud cloud = scene.t_n;
  cloud.gaussians[2].log_scale = Eigen::Vector3d::Constant(std::log(0.5));
  AdamState adam(cloud);
  DensifyStats stats(cloud.size());
  stats.grad_norm_sum[2] = 1.0;
  stats.visible_count[2] = 1;
  TrainConfig config;
  config.densify_grad_threshold = 0.5;
  config.split_scale_frac = 0.01;  // split threshold = 0.01 * extent
  std::mt19937_64 drng(2);
  const std::size_t before = cloud.size();
  const DensifyReport rep =
      densify_and_prune(cloud, adam, stats, config, 1.0, true, drng);
  CHECK(rep.split == 1);
  CHECK(cloud.size() == before + 1);  // two children replace one original
  CHECK(adam.congruent_with(cloud));
}

TEST_CASE("low-opacity Gaussians are pruned") {
  std::mt19937_64 rng(16);
  CameraView view = make_test_view(12, 12, true);
  SceneModel scene = make_random_scene(rng, 6, view);
  GaussianCloud cloud = scene.t_n;
  cloud.gaussians[1].opacity_logit = logit(0.001);
  cloud.gaussians[4].opacity_logit = logit(0.002);
  AdamState adam(cloud);
  DensifyStats stats(cloud.size());
  TrainConfig config;
  std::mt19937_64 drng(3);
  const DensifyReport rep =
      densify_and_prune(cloud, adam, stats, config, 1.0, true, drng);
  CHECK(rep.pruned == 2);
  CHECK(cloud.size() == 4);
  CHECK(adam.congruent_with(cloud));
  CHECK(stats.grad_norm_sum.size() == cloud.size());
}

TEST_CASE("densification respects the max-gaussian cap") {
  std::mt19937_64 rng(17);
  CameraView view = make_test_view(12, 12, true);
  SceneModel scene = make_random_scene(rng, 10, view);
  GaussianCloud cloud = scene.t_n;
  for (auto& g : cloud.gaussians) {
    g.log_scale = Eigen::Vector3d::Constant(std::log(0.004));
  }
  AdamState adam(cloud);
  DensifyStats stats(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    stats.grad_norm_sum[i] = 1.0;
    stats.visible_count[i] = 1;
  }
  TrainConfig config;
  config.densify_grad_threshold = 0.5;
  config.max_gaussians = 12;
  std::mt19937_64 drng(4);
  densify_and_prune(cloud, adam, stats, config, 1.0, true, drng);
  CHECK(cloud.size() <= 12);
  CHECK(adam.congruent_with(cloud));
}

TEST_CASE("densify keeps scene invariants over randomized stats") {
  std::mt19937_64 rng(18);
  CameraView view = make_test_view(12, 12, true);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    SceneModel scene = make_random_scene(rng, 12, view);
    GaussianCloud cloud = scene.t_n;
    AdamState adam(cloud);
    DensifyStats stats(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      stats.grad_norm_sum[i] = u(rng);
      stats.visible_count[i] = 1 + static_cast<int>(u(rng) * 3);
    }
    TrainConfig config;
    config.densify_grad_threshold = 0.4;
    std::mt19937_64 drng(trial);
    densify_and_prune(cloud, adam, stats, config, 1.0, true, drng);
    CHECK(cloud.valid());
    CHECK(adam.congruent_with(cloud));
    CHECK(static_cast<int>(cloud.size()) <= config.max_gaussians);
    CHECK(stats.grad_norm_sum.size() == cloud.size());
  }
}

TEST_CASE("train with zero iterations returns the scene unchanged") {
  std::mt19937_64 rng(19);
  CaptureSet set = make_capture_set(1, 1);
  SceneModel scene = make_random_scene(rng, 5, set.views[0]);
  const SceneModel before = scene;
  TrainConfig config;
  config.iterations = 0;
  const TrainResult result = train(scene, set, config);
  CHECK(result.steps_run == 0);
  CHECK(clouds_equal(scene.t_n, before.t_n));
}

TEST_CASE("single-view overfit decreases the data loss") {
  std::mt19937_64 rng(20);
  CameraView view = make_test_view(16, 16, true);
  SceneModel target_scene = make_random_scene(rng, 12, view);
  // Capture = composite of a reference scene, so the fit has a reachable
  // optimum.
  const ToneCurve gamma(target_scene.gamma_exponent);
  const CompositeRender target = render_composite(target_scene, view);
  Image raw(16, 16, 3);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = gamma.apply_inv(std::min(target.composite[i], 1.0));
  }
  view.image = raw;

  SceneModel scene = make_random_scene(rng, 12, view);
  CaptureSet set;
  set.views.push_back(view);

  TrainConfig config;
  config.iterations = 200;
  config.densify_interval = 0;  // isolate the optimizer
  TrainerState state(scene);
  std::vector<double> data_loss;
  for (int i = 0; i < config.iterations; ++i) {
    const LossReport rep = train_step(scene, view, config, state);
    data_loss.push_back(config.weights.l1 * rep.l1 +
                        config.weights.dssim * rep.dssim);
  }
  for (std::size_t k = 0; k + 50 < data_loss.size(); k += 10) {
    CHECK(data_loss[k + 50] <= 0.99 * data_loss[k]);
  }
}

TEST_CASE("train is deterministic: same seed, same checkpoint") {
  CaptureSet set = make_capture_set(2, 2);
  std::mt19937_64 rng_a(21), rng_b(21);
  SceneModel scene_a = make_random_scene(rng_a, 8, set.views[0]);
  SceneModel scene_b = make_random_scene(rng_b, 8, set.views[0]);

  TrainConfig config;
  config.iterations = 25;
  config.densify_interval = 10;
  config.seed = 777;
  train(scene_a, set, config);
  train(scene_b, set, config);
  CHECK(clouds_equal(scene_a.t_f, scene_b.t_f));
  CHECK(clouds_equal(scene_a.t_n, scene_b.t_n));
  CHECK(clouds_equal(scene_a.r, scene_b.r));
  CHECK(clouds_equal(scene_a.beta, scene_b.beta));
}

TEST_CASE("post-step parameters stay valid") {
  std::mt19937_64 rng(22);
  CaptureSet set = make_capture_set(2, 2);
  SceneModel scene = make_random_scene(rng, 8, set.views[0]);
  TrainConfig config;
  config.iterations = 12;
  train(scene, set, config);
  CHECK(scene.valid());
  for (const auto& g : scene.t_n.gaussians) {
    CHECK(std::abs(g.rotation.norm() - 1.0) < 1e-6);
  }
}

TEST_CASE("flashless scenes train under the same driver") {
  std::mt19937_64 rng(23);
  CaptureSet set = make_capture_set(2, 2);
  SceneModel scene = make_random_scene(rng, 6, set.views[0],
                                       SceneMode::kFlashless);
  TrainConfig config;
  config.iterations = 8;
  config.weights.linearity = 0.0;
  const TrainResult result = train(scene, set, config);
  CHECK(result.steps_run == 8);
  CHECK(scene.valid());
}

TEST_CASE("train config JSON round trip") {
  TrainConfig config;
  config.iterations = 123;
  config.rates.position = 3e-4;
  config.weights.linearity = 0.07;
  config.seed = 42;
  const TrainConfig back = train_config_from_json(train_config_to_json(config));
  CHECK(back.iterations == 123);
  CHECK(back.rates.position == doctest::Approx(3e-4));
  CHECK(back.weights.linearity == doctest::Approx(0.07));
  CHECK(back.seed == 42);
  CHECK_THROWS(train_config_from_json("{bad json"));
}
