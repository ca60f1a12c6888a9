#include "rba/analysis.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "rba/errors.hpp"
#include "rba/prng.hpp"

namespace rba {
namespace {

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.in_channels = 4;
  cfg.embed_dim = 8;
  cfg.num_queries = 5;
  cfg.num_classes = 3;
  return cfg;
}

std::vector<Scene> tiny_scenes(int count, std::uint64_t seed) {
  SceneConfig cfg;
  cfg.height = 12;
  cfg.width = 12;
  cfg.channels = 4;
  cfg.num_classes = 3;
  cfg.min_shapes = 2;
  cfg.max_shapes = 3;
  const SceneGenerator gen(cfg, seed);
  std::vector<Scene> scenes;
  for (int i = 0; i < count; ++i) scenes.push_back(gen.generate(static_cast<std::uint64_t>(i)));
  return scenes;
}

// Hand-built model with N == K and perfectly diagonal specialization:
// query q claims exactly class q with saturated confidence. Inputs are
// one-class constant scenes over basis-vector signatures.
struct DiagonalFixture {
  ModelParams params;
  std::vector<Scene> scenes;  // one constant scene per class
};

DiagonalFixture build_diagonal_fixture() {
  const int num_classes = 3;
  ModelConfig cfg;
  cfg.in_channels = num_classes;
  cfg.embed_dim = num_classes + 2;  // class channels + one constant channel
  cfg.num_queries = num_classes;
  cfg.num_classes = num_classes;

  DiagonalFixture fx;
  fx.params = init_params(cfg, 0);
  for (auto& ref : param_registry(fx.params)) *ref.tensor = Tensor(ref.tensor->shape());

  const std::size_t cp = static_cast<std::size_t>(cfg.embed_dim);
  const std::size_t constant_ch = static_cast<std::size_t>(num_classes);
  const double beta = 32.0;   // query scale; keeps self-attention diagonal
  const double gain = 8.0;    // encoder scale for class channels

  // Encoder: pass class channels through, add a constant channel.
  for (int c = 0; c < num_classes; ++c) {
    fx.params.enc_w1.at(static_cast<std::size_t>(c), static_cast<std::size_t>(c)) = 1.0;
    fx.params.enc_w2.at(static_cast<std::size_t>(c), static_cast<std::size_t>(c)) = gain;
  }
  fx.params.enc_b2[constant_ch] = 1.0;

  // Queries: big basis vectors; identity mask MLP (inputs stay nonnegative).
  for (int q = 0; q < num_classes; ++q)
    fx.params.queries.at(static_cast<std::size_t>(q), static_cast<std::size_t>(q)) = beta;
  for (std::size_t j = 0; j < cp; ++j) {
    fx.params.mask_w1.at(j, j) = 1.0;
    fx.params.mask_w2.at(j, j) = 1.0;
  }
  // Mask head: on-class membership logit +6, off-class -6.
  const double a = 12.0 / (16.0 * beta);
  for (int c = 0; c < num_classes; ++c)
    fx.params.mask_w3.at(static_cast<std::size_t>(c), static_cast<std::size_t>(c)) = a;
  fx.params.mask_w3.at(constant_ch, constant_ch) = (-6.0 - 128.0 * a) / 2.0;

  // Class head: read out the query's own channel.
  for (int c = 0; c < num_classes; ++c)
    fx.params.cls_w.at(static_cast<std::size_t>(c), static_cast<std::size_t>(c)) = 0.5;

  // One constant, noiseless scene per class.
  const int h = 10, w = 10;
  for (int c = 0; c < num_classes; ++c) {
    Scene scene;
    scene.labels.height = h;
    scene.labels.width = w;
    scene.labels.codes.assign(static_cast<std::size_t>(h) * w, static_cast<std::uint8_t>(c));
    scene.features = Tensor({static_cast<std::size_t>(num_classes), static_cast<std::size_t>(h),
                             static_cast<std::size_t>(w)});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t p = 0; p < plane; ++p)
      scene.features[static_cast<std::size_t>(c) * plane + p] = 1.0;
    scene.meta.height = h;
    scene.meta.width = w;
    scene.meta.channels = num_classes;
    scene.meta.num_classes = num_classes;
    fx.scenes.push_back(std::move(scene));
  }
  return fx;
}

TEST(Specialization, UntrainedModelHasNoHighConfidenceEvents) {
  const ModelParams params = init_params(tiny_model(), 5);
  const SpecializationResult spec = specialization_matrix(params, tiny_scenes(10, 7), 0.98);
  for (std::size_t i = 0; i < spec.counts.size(); ++i) EXPECT_EQ(spec.counts[i], 0.0);
  for (const int q : spec.class_to_query) EXPECT_EQ(q, -1);
}

TEST(Specialization, ZeroThresholdCountsEverything) {
  // Softmax probabilities are strictly positive, so a threshold of zero
  // fires for every (scene, query, class) triple.
  const ModelParams params = init_params(tiny_model(), 5);
  const std::vector<Scene> scenes = tiny_scenes(4, 7);
  const SpecializationResult spec = specialization_matrix(params, scenes, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < spec.counts.size(); ++i) total += spec.counts[i];
  EXPECT_EQ(total, static_cast<double>(scenes.size()) * 5.0 * 3.0);
}

TEST(Specialization, DiagonalFixtureIsDiagonal) {
  const DiagonalFixture fx = build_diagonal_fixture();
  const SpecializationResult spec = specialization_matrix(fx.params, fx.scenes, 0.98);
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(spec.class_to_query[static_cast<std::size_t>(c)], c);
    EXPECT_EQ(spec.query_to_class[static_cast<std::size_t>(c)], c);
    for (int q = 0; q < 3; ++q)
      EXPECT_EQ(fx.scenes.size() > 0 &&
                    spec.counts.at(static_cast<std::size_t>(q), static_cast<std::size_t>(c)) > 0,
                q == c);
  }
}

TEST(MaskingAblation, DiagonalFixtureRowsAgree) {
  const DiagonalFixture fx = build_diagonal_fixture();
  const std::vector<MaskingAblationRow> rows = masking_ablation(fx.params, fx.scenes, 0.98);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& row : rows) {
    ASSERT_TRUE(row.defined) << "class " << row.class_id;
    EXPECT_NEAR(row.iou_none, 1.0, 1e-9);
    EXPECT_NEAR(row.iou_hard, 1.0, 1e-9);
    EXPECT_NEAR(row.iou_soft, 1.0, 1e-9);
    EXPECT_LE(std::abs(row.iou_hard - row.iou_soft), 0.10);
    EXPECT_LE(std::abs(row.iou_none - row.iou_soft), 0.10);
  }
}

TEST(MaskingAblation, UnspecializedClassIsUndefined) {
  const ModelParams params = init_params(tiny_model(), 5);
  const std::vector<MaskingAblationRow> rows =
      masking_ablation(params, tiny_scenes(3, 7), 0.98);
  for (const auto& row : rows) {
    EXPECT_FALSE(row.defined);
    EXPECT_EQ(row.query, -1);
  }
}

TEST(LogitModes, PlantedArchetypesRecoveredExactly) {
  // Four planted logit behaviors: confident inlier, all-rejected outlier,
  // two-moderate boundary, several-weak ambiguous.
  const std::vector<std::vector<double>> archetypes = {
      {8.0, -9.0, -9.0, -9.0},
      {-9.0, -9.0, -9.0, -9.0},
      {1.5, 1.5, -9.0, -9.0},
      {0.5, 0.5, 0.5, -9.0},
  };
  const int per_group = 60;
  Xoshiro256ss rng(17);
  Tensor points({static_cast<std::size_t>(4 * per_group), 4});
  std::vector<std::uint8_t> flags;
  std::vector<int> planted;
  for (int g = 0; g < 4; ++g) {
    for (int i = 0; i < per_group; ++i) {
      const std::size_t row = static_cast<std::size_t>(g * per_group + i);
      for (std::size_t j = 0; j < 4; ++j)
        points.at(row, j) = archetypes[static_cast<std::size_t>(g)][j] + 0.05 * rng.gaussian();
      flags.push_back(g == 1 ? 1 : 0);
      planted.push_back(g);
    }
  }

  std::vector<int> assignments;
  const LogitModeReport report = cluster_logit_modes(points, flags, 4, 23, &assignments);

  // Exact recovery up to relabeling: cluster ids are constant within each
  // planted group and distinct across groups.
  std::vector<int> group_cluster(4, -1);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const int g = planted[i];
    if (group_cluster[static_cast<std::size_t>(g)] == -1)
      group_cluster[static_cast<std::size_t>(g)] = assignments[i];
    EXPECT_EQ(assignments[i], group_cluster[static_cast<std::size_t>(g)]);
  }
  std::vector<int> sorted = group_cluster;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int>{0, 1, 2, 3}));

  // The all-rejected cluster holds every outlier pixel and the lowest
  // mean max-logit.
  EXPECT_EQ(report.lowest_maxlogit_cluster, group_cluster[1]);
  EXPECT_NEAR(report.outlier_share[static_cast<std::size_t>(group_cluster[1])], 1.0, 1e-12);
}

TEST(LogitModes, SingleClusterCentroidIsTheMean) {
  Xoshiro256ss rng(29);
  Tensor points({50, 3});
  for (std::size_t i = 0; i < points.size(); ++i) points[i] = rng.uniform(-2.0, 2.0);
  const LogitModeReport report =
      cluster_logit_modes(points, std::vector<std::uint8_t>(50, 0), 1, 5);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 50; ++i) mean += points.at(i, j);
    mean /= 50.0;
    EXPECT_NEAR(report.centroids.at(0, j), mean, 1e-12);
  }
}

TEST(LogitModes, DeterministicGivenSeed) {
  const ModelParams params = init_params(tiny_model(), 5);
  const std::vector<Scene> scenes = tiny_scenes(3, 7);
  std::vector<int> a_assign, b_assign;
  const LogitModeReport a = logit_mode_analysis(params, scenes, 4, 11);
  const LogitModeReport b = logit_mode_analysis(params, scenes, 4, 11);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.sizes, b.sizes);
}

TEST(LogitModes, FewerPixelsThanClustersThrows) {
  Tensor points({2, 3});
  EXPECT_THROW(cluster_logit_modes(points, {0, 0}, 4, 1), EngineError);
}

}  // namespace
}  // namespace rba
