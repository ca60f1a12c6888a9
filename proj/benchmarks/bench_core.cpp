#include <benchmark/benchmark.h>

#include "rba/kmeans.hpp"
#include "rba/losses.hpp"
#include "rba/matching.hpp"
#include "rba/metrics.hpp"
#include "rba/model.hpp"
#include "rba/prng.hpp"
#include "rba/scene.hpp"
#include "rba/tensor.hpp"

namespace {

rba::Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  rba::Xoshiro256ss rng(seed);
  rba::Tensor t({rows, cols});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const rba::Tensor a = random_matrix(n, n, 1);
  const rba::Tensor b = random_matrix(n, n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rba::matmul(a, b));
  }
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_Forward(benchmark::State& state) {
  rba::SceneConfig scene_cfg;
  rba::ModelConfig model_cfg;
  model_cfg.in_channels = scene_cfg.channels;
  model_cfg.num_classes = scene_cfg.num_classes;
  const rba::SceneGenerator gen(scene_cfg, 11);
  const rba::Scene scene = gen.generate(0);
  const rba::ModelParams params = rba::init_params(model_cfg, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rba::forward(params, scene.features));
  }
}
BENCHMARK(BM_Forward);

void BM_ForwardBackward(benchmark::State& state) {
  rba::SceneConfig scene_cfg;
  rba::ModelConfig model_cfg;
  model_cfg.in_channels = scene_cfg.channels;
  model_cfg.num_classes = scene_cfg.num_classes;
  const rba::SceneGenerator gen(scene_cfg, 11);
  const rba::Scene scene = gen.generate(0);
  const rba::ModelParams params = rba::init_params(model_cfg, 5);
  const rba::GtMaskSet gt = rba::gt_masks_from_labels(scene.labels, model_cfg.num_classes);
  const rba::LossWeights weights;
  for (auto _ : state) {
    const rba::ModelOutput out = rba::forward(params, scene.features);
    const rba::MatchResult match = rba::hungarian(rba::pairwise_cost(out, gt, weights));
    const rba::ClosedSetLoss loss = rba::closed_set_loss(out, gt, match, weights);
    rba::UpstreamGrads up{loss.d_class_probs, loss.d_memberships};
    benchmark::DoNotOptimize(rba::backward(params, out, up));
  }
}
BENCHMARK(BM_ForwardBackward);

void BM_Hungarian(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const rba::Tensor cost = random_matrix(n, n, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rba::hungarian(cost));
  }
}
BENCHMARK(BM_Hungarian)->Arg(8)->Arg(64);

void BM_AveragePrecision(benchmark::State& state) {
  rba::Xoshiro256ss rng(17);
  rba::PixelEvalSet set;
  for (int i = 0; i < 1 << 16; ++i) {
    set.scores.push_back(rng.uniform());
    set.labels.push_back(rng.uniform() < 0.1 ? 1 : 0);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(rba::average_precision(set));
  }
}
BENCHMARK(BM_AveragePrecision);

void BM_KMeans(benchmark::State& state) {
  const rba::Tensor points = random_matrix(4096, 4, 23);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rba::kmeans(points, 4, 7));
  }
}
BENCHMARK(BM_KMeans);

}  // namespace

BENCHMARK_MAIN();
