#include <benchmark/benchmark.h>

#include <random>

#include "beamsplit/losses.hpp"
#include "beamsplit/rasterizer.hpp"
#include "beamsplit/scene_model.hpp"
#include "beamsplit/synth.hpp"

using namespace beamsplit;

namespace {

GaussianCloud random_cloud(int n, int channels, int degree,
                           std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GaussianCloud cloud;
  cloud.channels = channels;
  cloud.sh_degree = degree;
  cloud.gaussians.resize(n);
  for (auto& g : cloud.gaussians) {
    g.position = Eigen::Vector3d(2.4 * u(rng) - 1.2, 1.8 * u(rng) - 0.9,
                                 0.6 * u(rng) - 0.3);
    Eigen::Vector4d q(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
    g.rotation = q.normalized();
    g.log_scale = Eigen::Vector3d::Constant(std::log(0.02 + 0.05 * u(rng)));
    g.opacity_logit = logit(0.2 + 0.6 * u(rng));
    g.sh = SHCoeffs(degree, channels);
    for (int c = 0; c < channels; ++c) g.sh.dc(c) = (0.2 + 0.6 * u(rng)) / kSH0;
  }
  return cloud;
}

CameraView bench_view() {
  SynthSpec spec;
  const SynthDataset ds = emit_dataset(spec);
  return ds.captures.views.front();
}

void BM_RenderForward(benchmark::State& state) {
  std::mt19937_64 rng(7);
  const GaussianCloud cloud =
      random_cloud(static_cast<int>(state.range(0)), 3, 1, rng);
  const CameraView view = bench_view();
  for (auto _ : state) {
    RenderTarget rt = render(cloud, view);
    benchmark::DoNotOptimize(rt.color.data());
  }
}
BENCHMARK(BM_RenderForward)->Arg(1000)->Arg(3000)->Unit(benchmark::kMillisecond);

void BM_RenderBackward(benchmark::State& state) {
  std::mt19937_64 rng(7);
  const GaussianCloud cloud =
      random_cloud(static_cast<int>(state.range(0)), 3, 1, rng);
  const CameraView view = bench_view();
  const RenderTarget rt = render(cloud, view);
  Image d_color(view.intrinsics.width, view.intrinsics.height, 3, 1e-3);
  Image d_depth;
  for (auto _ : state) {
    ParamGradients grads = render_backward(*rt.ctx, d_color, d_depth);
    benchmark::DoNotOptimize(grads.position.data());
  }
}
BENCHMARK(BM_RenderBackward)->Arg(1000)->Arg(3000)->Unit(benchmark::kMillisecond);

void BM_TotalLossStep(benchmark::State& state) {
  SynthSpec spec;
  const SynthDataset ds = emit_dataset(spec);
  std::mt19937_64 rng(11);
  SceneModel scene;
  scene.t_f = random_cloud(1500, 3, 1, rng);
  scene.t_n = random_cloud(1500, 3, 1, rng);
  scene.r = random_cloud(1500, 3, 1, rng);
  scene.beta = random_cloud(1500, 1, 0, rng);
  const LossWeights weights;
  for (auto _ : state) {
    TotalLossResult res =
        total_loss(scene, ds.captures.views.front(), weights, {}, true);
    benchmark::DoNotOptimize(res.report.total);
  }
}
BENCHMARK(BM_TotalLossStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
