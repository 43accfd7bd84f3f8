// beamsplit: transmission/reflection separation from unpaired flash and
// no-flash captures, on a differentiable Gaussian-splatting engine.
//
// Subcommands: synth, fit, render, subtract, eval.
// Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "beamsplit/dataset.hpp"
#include "beamsplit/errors.hpp"
#include "beamsplit/flash_init.hpp"
#include "beamsplit/image_io.hpp"
#include "beamsplit/losses.hpp"
#include "beamsplit/metrics.hpp"
#include "beamsplit/scene_model.hpp"
#include "beamsplit/synth.hpp"
#include "beamsplit/trainer.hpp"

namespace fs = std::filesystem;
using namespace beamsplit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct SynthArgs {
  std::string spec_path;
  std::string out_dir;
  std::int64_t seed = -1;
};

int run_synth(const SynthArgs& args) {
  SynthSpec spec = load_synth_spec(args.spec_path);
  if (args.seed >= 0) spec.seed = static_cast<std::uint64_t>(args.seed);
  const SynthDataset dataset = emit_dataset(spec);
  save_dataset(args.out_dir, dataset);
  std::cout << "synth: wrote " << dataset.captures.views.size() << " views ("
            << dataset.captures.count_flash() << " flash, "
            << dataset.captures.count_noflash() << " no-flash) to "
            << args.out_dir << "\n";
  return kExitOk;
}

struct FitArgs {
  std::string data_dir;
  std::string config_path;
  std::string out_dir;
  bool flashless = false;
  double hard_linear = 0.0;  // 0: soft linearity
  bool no_init = false;
  bool align_auto = false;
  std::int64_t seed = -1;
};

int run_fit(const FitArgs& args) {
  const LoadedDataset dataset = load_dataset(args.data_dir);
  TrainConfig config;
  if (!args.config_path.empty()) config = load_train_config(args.config_path);
  if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);

  CaptureSet train_set;
  for (const auto& v : dataset.captures.views) {
    if (!v.holdout) train_set.views.push_back(v);
  }
  if (train_set.views.empty()) throw data_error("fit: no training views");

  InitConfig init_config;
  init_config.mode = args.flashless ? SceneMode::kFlashless
                     : args.hard_linear > 0.0 ? SceneMode::kHardLinear
                                              : SceneMode::kFull;
  init_config.hard_linear_c = args.hard_linear;
  init_config.fallback_seed = config.seed;

  SceneModel scene;
  if (args.no_init || !dataset.has_points()) {
    if (!args.no_init) {
      std::cerr << "fit: dataset has no point clouds, seeding randomly\n";
    }
    scene = init_scene(LabeledPoints{}, init_config);
  } else if (args.flashless) {
    scene = init_scene_unlabeled(dataset.noflash_points, init_config);
  } else {
    SfMPoints flash_pts = dataset.flash_points;
    if (args.align_auto) {
      std::vector<Eigen::Vector3d> flash_centers, noflash_centers;
      for (const auto& v : train_set.views) {
        (v.flash ? flash_centers : noflash_centers)
            .push_back(v.world_to_cam.camera_center());
      }
      SimilarityTransform transform;
      try {
        transform = align_clouds(flash_centers, noflash_centers);
      } catch (const alignment_unreliable_error& e) {
        std::cerr << "fit: " << e.what() << "; forcing identity alignment\n";
        transform = SimilarityTransform::identity();
      }
      for (auto& p : flash_pts.positions) p = transform.apply(p);
    }
    const LabeledPoints labels =
        classify_points(flash_pts, dataset.noflash_points, ClassifyConfig{});
    scene = init_scene(labels, init_config);
  }
  if (args.flashless) config.weights.linearity = 0.0;

  fs::create_directories(args.out_dir);
  TrainOptions options;
  options.log_csv_path = (fs::path(args.out_dir) / "training_log.csv").string();
  options.checkpoint_dir = args.out_dir;
  const TrainResult result = train(scene, train_set, config, options);
  save_checkpoint(args.out_dir, scene, result.steps_run);
  {
    std::ofstream cf(fs::path(args.out_dir) / "run_config.json",
                     std::ios::binary);
    cf << train_config_to_json(config) << "\n";
  }
  std::cout << "fit: " << result.steps_run << " steps ("
            << result.skipped_steps << " skipped), checkpoint in "
            << args.out_dir << "\n";
  return kExitOk;
}

struct RenderArgs {
  std::string ckpt_dir;
  std::string poses_path;
  std::string layer = "composite";
  std::string flash = "off";
  std::string out_dir;
};

int run_render(const RenderArgs& args) {
  const SceneModel scene = load_checkpoint(args.ckpt_dir);
  std::vector<CameraView> poses = load_poses(args.poses_path);
  fs::create_directories(args.out_dir);
  const bool flash_on = args.flash == "on";
  for (auto& view : poses) {
    view.flash = flash_on;
    const CompositeRender cr = render_composite(scene, view);
    const Image* map = nullptr;
    if (args.layer == "composite") map = &cr.composite;
    else if (args.layer == "T") map = &cr.transmission;
    else if (args.layer == "R") map = &cr.reflection;
    else if (args.layer == "beta") map = &cr.beta_map;
    else if (args.layer == "depthT") map = &cr.depth_t;
    else if (args.layer == "depthR") map = &cr.depth_r;
    else throw config_error("render: unknown layer " + args.layer);
    const fs::path base =
        fs::path(args.out_dir) / (view.view_id + "_" + args.layer);
    write_pfm(base.string() + ".pfm", *map);
    if (args.layer == "depthT" || args.layer == "depthR") {
      // Depth previews normalized to the maximum for visibility.
      Image preview = *map;
      const double peak = preview.max_value();
      if (peak > 0) {
        for (std::size_t i = 0; i < preview.size(); ++i) preview[i] /= peak;
      }
      write_png_preview(base.string() + ".png", preview);
    } else {
      write_png_preview(base.string() + ".png", *map);
    }
  }
  std::cout << "render: wrote " << poses.size() << " " << args.layer
            << " maps to " << args.out_dir << "\n";
  return kExitOk;
}

struct SubtractArgs {
  std::string flash_path, noflash_path, out_path;
};

int run_subtract(const SubtractArgs& args) {
  const Image i_f = read_pfm(args.flash_path);
  const Image i_n = read_pfm(args.noflash_path);
  write_pfm(args.out_path, paired_subtract(i_f, i_n));
  return kExitOk;
}

struct EvalArgs {
  std::string ckpt_dir, data_dir, out_path;
};

int run_eval(const EvalArgs& args) {
  const SceneModel scene = load_checkpoint(args.ckpt_dir);
  const LoadedDataset dataset = load_dataset(args.data_dir);
  const EvalReport report = evaluate(scene, dataset);
  save_eval_report(args.out_path, report);
  std::cout << "eval: mean T PSNR " << report.mean_psnr_t_train
            << " dB (train), " << report.mean_psnr_t_holdout
            << " dB (holdout); report in " << args.out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transmission/reflection separation from unpaired flash and "
               "no-flash captures via differentiable Gaussian splatting"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth_cmd =
      app.add_subcommand("synth", "Generate a synthetic oracle dataset");
  synth_cmd->add_option("--spec", synth_args.spec_path, "Scene spec JSON")
      ->required();
  synth_cmd->add_option("--out", synth_args.out_dir, "Output dataset dir")
      ->required();
  synth_cmd->add_option("--seed", synth_args.seed, "Override the spec seed");

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a scene to a dataset");
  fit_cmd->add_option("--data", fit_args.data_dir, "Dataset dir")->required();
  fit_cmd->add_option("--config", fit_args.config_path, "Run config JSON");
  fit_cmd->add_option("--out", fit_args.out_dir, "Checkpoint dir")->required();
  fit_cmd->add_flag("--flashless", fit_args.flashless,
                    "3-cloud ablation without flash cues");
  fit_cmd->add_option("--hard-linear", fit_args.hard_linear,
                      "Enforce T_F = c * T_N with this c");
  fit_cmd->add_flag("--no-init", fit_args.no_init,
                    "Skip flash-cue initialization (random seeding)");
  fit_cmd->add_flag("--align-auto", fit_args.align_auto,
                    "Estimate the flash/no-flash similarity alignment");
  fit_cmd->add_option("--seed", fit_args.seed, "Override the config seed");

  RenderArgs render_args;
  auto* render_cmd = app.add_subcommand("render", "Render checkpoint layers");
  render_cmd->add_option("--ckpt", render_args.ckpt_dir, "Checkpoint dir")
      ->required();
  render_cmd->add_option("--poses", render_args.poses_path, "Poses JSON")
      ->required();
  render_cmd
      ->add_option("--layer", render_args.layer,
                   "composite|T|R|beta|depthT|depthR")
      ->check(CLI::IsMember(
          {"composite", "T", "R", "beta", "depthT", "depthR"}));
  render_cmd->add_option("--flash", render_args.flash, "on|off")
      ->check(CLI::IsMember({"on", "off"}));
  render_cmd->add_option("--out", render_args.out_dir, "Output dir")
      ->required();

  SubtractArgs subtract_args;
  auto* subtract_cmd =
      app.add_subcommand("subtract", "Paired flash/no-flash difference");
  subtract_cmd->add_option("--flash", subtract_args.flash_path, "Flash PFM")
      ->required();
  subtract_cmd
      ->add_option("--noflash", subtract_args.noflash_path, "No-flash PFM")
      ->required();
  subtract_cmd->add_option("--out", subtract_args.out_path, "Output PFM")
      ->required();

  EvalArgs eval_args;
  auto* eval_cmd =
      app.add_subcommand("eval", "Evaluate a checkpoint against ground truth");
  eval_cmd->add_option("--ckpt", eval_args.ckpt_dir, "Checkpoint dir")
      ->required();
  eval_cmd->add_option("--data", eval_args.data_dir, "Dataset dir")
      ->required();
  eval_cmd->add_option("--out", eval_args.out_path, "Report JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth_args);
    if (fit_cmd->parsed()) return run_fit(fit_args);
    if (render_cmd->parsed()) return run_render(render_args);
    if (subtract_cmd->parsed()) return run_subtract(subtract_args);
    if (eval_cmd->parsed()) return run_eval(eval_args);
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
