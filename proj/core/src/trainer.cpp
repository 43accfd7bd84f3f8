#include "beamsplit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "beamsplit/errors.hpp"

namespace beamsplit {

using nlohmann::json;
namespace fs = std::filesystem;

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["iterations"] = c.iterations;
  j["lr"] = {{"position", c.rates.position},
             {"rotation", c.rates.rotation},
             {"scale", c.rates.scale},
             {"opacity", c.rates.opacity},
             {"sh", c.rates.sh}};
  j["densify_interval"] = c.densify_interval;
  j["densify_grad_threshold"] = c.densify_grad_threshold;
  j["densify_until_frac"] = c.densify_until_frac;
  j["prune_opacity_threshold"] = c.prune_opacity_threshold;
  j["max_gaussians"] = c.max_gaussians;
  j["split_scale_frac"] = c.split_scale_frac;
  j["split_scale_shrink"] = c.split_scale_shrink;
  j["weights"] = {{"l1", c.weights.l1},
                  {"dssim", c.weights.dssim},
                  {"linearity", c.weights.linearity},
                  {"depth", c.weights.depth}};
  j["ssim"] = {{"window", c.ssim.window},
               {"sigma", c.ssim.sigma},
               {"k1", c.ssim.k1},
               {"k2", c.ssim.k2}};
  j["seed"] = c.seed;
  j["checkpoint_interval"] = c.checkpoint_interval;
  j["adam"] = {{"beta1", c.adam_beta1},
               {"beta2", c.adam_beta2},
               {"eps", c.adam_eps}};
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("train config: malformed JSON: ") + e.what());
  }
  TrainConfig c;
  c.iterations = j.value("iterations", c.iterations);
  if (j.contains("lr")) {
    const auto& l = j["lr"];
    c.rates.position = l.value("position", c.rates.position);
    c.rates.rotation = l.value("rotation", c.rates.rotation);
    c.rates.scale = l.value("scale", c.rates.scale);
    c.rates.opacity = l.value("opacity", c.rates.opacity);
    c.rates.sh = l.value("sh", c.rates.sh);
  }
  c.densify_interval = j.value("densify_interval", c.densify_interval);
  c.densify_grad_threshold =
      j.value("densify_grad_threshold", c.densify_grad_threshold);
  c.densify_until_frac = j.value("densify_until_frac", c.densify_until_frac);
  c.prune_opacity_threshold =
      j.value("prune_opacity_threshold", c.prune_opacity_threshold);
  c.max_gaussians = j.value("max_gaussians", c.max_gaussians);
  c.split_scale_frac = j.value("split_scale_frac", c.split_scale_frac);
  c.split_scale_shrink = j.value("split_scale_shrink", c.split_scale_shrink);
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    c.weights.l1 = w.value("l1", c.weights.l1);
    c.weights.dssim = w.value("dssim", c.weights.dssim);
    c.weights.linearity = w.value("linearity", c.weights.linearity);
    c.weights.depth = w.value("depth", c.weights.depth);
  }
  if (j.contains("ssim")) {
    const auto& s = j["ssim"];
    c.ssim.window = s.value("window", c.ssim.window);
    c.ssim.sigma = s.value("sigma", c.ssim.sigma);
    c.ssim.k1 = s.value("k1", c.ssim.k1);
    c.ssim.k2 = s.value("k2", c.ssim.k2);
  }
  c.seed = j.value("seed", c.seed);
  c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
  if (j.contains("adam")) {
    const auto& a = j["adam"];
    c.adam_beta1 = a.value("beta1", c.adam_beta1);
    c.adam_beta2 = a.value("beta2", c.adam_beta2);
    c.adam_eps = a.value("eps", c.adam_eps);
  }
  if (!c.valid()) throw config_error("train config: invalid values");
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return train_config_from_json(text);
}

std::vector<int> schedule_views(const CaptureSet& captures,
                                std::mt19937_64& rng) {
  std::vector<int> flash_pool, noflash_pool;
  for (int i = 0; i < static_cast<int>(captures.views.size()); ++i) {
    (captures.views[i].flash ? flash_pool : noflash_pool).push_back(i);
  }
  std::shuffle(flash_pool.begin(), flash_pool.end(), rng);
  std::shuffle(noflash_pool.begin(), noflash_pool.end(), rng);

  // The larger pool leads; flash leads ties. Alternate while both pools
  // last, then drain the remainder.
  const bool flash_first = flash_pool.size() >= noflash_pool.size();
  std::vector<int>* a = flash_first ? &flash_pool : &noflash_pool;
  std::vector<int>* b = flash_first ? &noflash_pool : &flash_pool;
  std::vector<int> order;
  order.reserve(captures.views.size());
  std::size_t ia = 0, ib = 0;
  bool take_a = true;
  while (ia < a->size() || ib < b->size()) {
    if (take_a) {
      if (ia < a->size()) order.push_back((*a)[ia++]);
      else order.push_back((*b)[ib++]);
    } else {
      if (ib < b->size()) order.push_back((*b)[ib++]);
      else order.push_back((*a)[ia++]);
    }
    take_a = !take_a;
  }
  return order;
}

void DensifyStats::accumulate(const ParamGradients& grads) {
  const std::size_t n =
      std::min(grad_norm_sum.size(), grads.mean2d_grad_norm.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double norm = grads.mean2d_grad_norm[i];
    if (norm > 0.0) {
      grad_norm_sum[i] += norm;
      visible_count[i] += 1;
    }
  }
}

void DensifyStats::reset(std::size_t n) {
  grad_norm_sum.assign(n, 0.0);
  visible_count.assign(n, 0);
}

DensifyReport densify_and_prune(GaussianCloud& cloud, AdamState& adam,
                                DensifyStats& stats, const TrainConfig& config,
                                double scene_extent, bool allow_grow,
                                std::mt19937_64& rng) {
  DensifyReport report;
  const std::size_t n = cloud.size();
  if (stats.grad_norm_sum.size() != n || !adam.congruent_with(cloud)) {
    throw invalid_gradient_shape_error("densify_and_prune: stale state");
  }

  std::vector<bool> remove(n, false);
  std::vector<Gaussian3D> added;
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  const double split_size = config.split_scale_frac * scene_extent;

  if (allow_grow) {
    for (std::size_t i = 0; i < n; ++i) {
      if (stats.visible_count[i] == 0) continue;
      const double avg = stats.grad_norm_sum[i] / stats.visible_count[i];
      if (avg < config.densify_grad_threshold) continue;
      const std::size_t projected =
          n + added.size() - static_cast<std::size_t>(report.split);
      if (projected >= static_cast<std::size_t>(config.max_gaussians)) break;

      const Gaussian3D& g = cloud.gaussians[i];
      const double max_scale = g.log_scale.array().exp().maxCoeff();
      if (max_scale <= split_size) {
        added.push_back(g);  // clone; the optimizer separates the pair
        ++report.cloned;
      } else {
        const Eigen::Matrix3d basis =
            rotation_from_quaternion(g.rotation) *
            Eigen::Vector3d(g.log_scale.array().exp()).asDiagonal();
        for (int k = 0; k < 2; ++k) {
          Gaussian3D child = g;
          const Eigen::Vector3d xi(unit_normal(rng), unit_normal(rng),
                                   unit_normal(rng));
          child.position = g.position + basis * xi;
          child.log_scale =
              g.log_scale.array() - std::log(config.split_scale_shrink);
          added.push_back(child);
        }
        remove[i] = true;
        ++report.split;
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!remove[i] &&
        cloud.gaussians[i].activated_opacity() < config.prune_opacity_threshold) {
      remove[i] = true;
      ++report.pruned;
    }
  }

  GaussianCloud next;
  next.channels = cloud.channels;
  next.sh_degree = cloud.sh_degree;
  next.gaussians.reserve(n + added.size());
  AdamState next_adam;
  next_adam.step = adam.step;

  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < n; ++i) {
    if (!remove[i]) {
      survivors.push_back(i);
      next.gaussians.push_back(cloud.gaussians[i]);
    }
  }
  for (auto& g : added) next.gaussians.push_back(std::move(g));

  next_adam.m = ParamGradients(next);
  next_adam.v = ParamGradients(next);
  for (std::size_t k = 0; k < survivors.size(); ++k) {
    const std::size_t i = survivors[k];
    next_adam.m.position[k] = adam.m.position[i];
    next_adam.m.rotation[k] = adam.m.rotation[i];
    next_adam.m.log_scale[k] = adam.m.log_scale[i];
    next_adam.m.opacity_logit[k] = adam.m.opacity_logit[i];
    next_adam.m.sh[k] = adam.m.sh[i];
    next_adam.v.position[k] = adam.v.position[i];
    next_adam.v.rotation[k] = adam.v.rotation[i];
    next_adam.v.log_scale[k] = adam.v.log_scale[i];
    next_adam.v.opacity_logit[k] = adam.v.opacity_logit[i];
    next_adam.v.sh[k] = adam.v.sh[i];
  }

  cloud = std::move(next);
  adam = std::move(next_adam);
  stats.reset(cloud.size());
  return report;
}

TrainerState::TrainerState(const SceneModel& scene)
    : adam_tn(scene.t_n),
      adam_r(scene.r),
      adam_beta(scene.beta),
      stats_tn(scene.t_n.size()),
      stats_r(scene.r.size()),
      stats_beta(scene.beta.size()) {
  if (scene.uses_tf_cloud()) {
    adam_tf = AdamState(scene.t_f);
    stats_tf = DensifyStats(scene.t_f.size());
  }
  scene_extent = beamsplit::scene_extent(scene);
}

double scene_extent(const SceneModel& scene) {
  std::vector<const GaussianCloud*> clouds = {&scene.t_n, &scene.r, &scene.beta};
  if (scene.uses_tf_cloud()) clouds.push_back(&scene.t_f);
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  std::size_t count = 0;
  for (const auto* c : clouds) {
    for (const auto& g : c->gaussians) {
      centroid += g.position;
      ++count;
    }
  }
  if (count == 0) return 1.0;
  centroid /= static_cast<double>(count);
  double radius = 0.0;
  for (const auto* c : clouds) {
    for (const auto& g : c->gaussians) {
      radius = std::max(radius, (g.position - centroid).norm());
    }
  }
  return radius > 0.0 ? radius : 1.0;
}

LossReport train_step(SceneModel& scene, const CameraView& view,
                      const TrainConfig& config, TrainerState& state) {
  TotalLossResult result =
      total_loss(scene, view, config.weights, config.ssim, true);

  bool finite = std::isfinite(result.report.total);
  if (finite) {
    finite = result.grads.t_n.all_finite() && result.grads.r.all_finite() &&
             result.grads.beta.all_finite();
    if (finite && scene.uses_tf_cloud()) {
      finite = result.grads.t_f.all_finite();
    }
  }
  if (!finite) {
    ++state.skipped_steps;
    if (!state.rates_halved) {
      state.rates_halved = true;
      std::cerr << "train_step: non-finite loss at view " << view.view_id
                << "; step skipped, learning rates halved\n";
    } else {
      std::cerr << "train_step: non-finite loss at view " << view.view_id
                << "; step skipped\n";
    }
    return result.report;
  }

  const LearningRates rates =
      state.rates_halved ? config.rates.scaled(0.5) : config.rates;
  auto update = [&](GaussianCloud& cloud, const ParamGradients& grads,
                    AdamState& adam, DensifyStats& stats) {
    adam_step(cloud, grads, adam, rates, state.scene_extent, config.adam_beta1,
              config.adam_beta2, config.adam_eps);
    cloud.renormalize_rotations();
    stats.accumulate(grads);
  };
  if (scene.uses_tf_cloud()) {
    update(scene.t_f, result.grads.t_f, state.adam_tf, state.stats_tf);
  }
  update(scene.t_n, result.grads.t_n, state.adam_tn, state.stats_tn);
  update(scene.r, result.grads.r, state.adam_r, state.stats_r);
  update(scene.beta, result.grads.beta, state.adam_beta, state.stats_beta);
  return result.report;
}

TrainResult train(SceneModel& scene, const CaptureSet& captures,
                  const TrainConfig& config, const TrainOptions& options) {
  if (!config.valid()) throw config_error("train: invalid config");
  if (captures.views.empty()) throw config_error("train: no views");
  TrainResult result;
  if (config.iterations == 0) return result;

  TrainerState state(scene);
  std::mt19937_64 rng_schedule(config.seed);
  std::mt19937_64 rng_densify(config.seed ^ 0x9E3779B97F4A7C15ULL);

  std::ofstream csv;
  if (!options.log_csv_path.empty()) {
    csv.open(options.log_csv_path, std::ios::binary);
    if (!csv) throw data_error("cannot open log: " + options.log_csv_path);
    csv << "iteration,view_id,l1,dssim,linearity,depth,total\n";
  }

  int step = 0;
  while (step < config.iterations) {
    const std::vector<int> order = schedule_views(captures, rng_schedule);
    for (int idx : order) {
      if (step >= config.iterations) break;
      const CameraView& view = captures.views[idx];
      const LossReport rep = train_step(scene, view, config, state);
      ++step;
      result.log.push_back(rep);
      if (csv.is_open()) {
        char line[256];
        std::snprintf(line, sizeof(line), "%d,%s,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                      step, view.view_id.c_str(), rep.l1, rep.dssim,
                      rep.linearity, rep.depth, rep.total);
        csv << line;
      }

      if (config.densify_interval > 0 && step % config.densify_interval == 0) {
        const bool allow_grow =
            step <= config.densify_until_frac * config.iterations;
        if (scene.uses_tf_cloud()) {
          densify_and_prune(scene.t_f, state.adam_tf, state.stats_tf, config,
                            state.scene_extent, allow_grow, rng_densify);
        }
        densify_and_prune(scene.t_n, state.adam_tn, state.stats_tn, config,
                          state.scene_extent, allow_grow, rng_densify);
        densify_and_prune(scene.r, state.adam_r, state.stats_r, config,
                          state.scene_extent, allow_grow, rng_densify);
        densify_and_prune(scene.beta, state.adam_beta, state.stats_beta, config,
                          state.scene_extent, allow_grow, rng_densify);
      }
      if (config.checkpoint_interval > 0 && !options.checkpoint_dir.empty() &&
          step % config.checkpoint_interval == 0 && step < config.iterations) {
        char name[32];
        std::snprintf(name, sizeof(name), "iter_%06d", step);
        save_checkpoint((fs::path(options.checkpoint_dir) / name).string(),
                        scene, step);
      }
    }
  }

  result.steps_run = step;
  result.skipped_steps = state.skipped_steps;
  if (state.skipped_steps > 0) {
    std::cerr << "train: " << state.skipped_steps
              << " step(s) skipped due to non-finite losses\n";
  }
  return result;
}

}  // namespace beamsplit
