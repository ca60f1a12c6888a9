#include "rba/scoring.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rba/errors.hpp"
#include "rba/model.hpp"
#include "rba/prng.hpp"
#include "rba/scene.hpp"

namespace rba {
namespace {

Tensor logits_from(const std::vector<double>& per_class) {
  Tensor logits({per_class.size(), 1, 1});
  for (std::size_t c = 0; c < per_class.size(); ++c) logits[c] = per_class[c];
  return logits;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

TEST(Rba, ZeroLogitsScoreZero) {
  EXPECT_DOUBLE_EQ(score_rba(logits_from({0, 0, 0, 0})).values[0], 0.0);
}

TEST(Rba, DirectTanhEvaluation) {
  // K=4, logits [2, -2, -2, -2]: -(tanh 2 - 3 tanh 2) = 2 tanh 2 = 1.9281.
  EXPECT_NEAR(score_rba(logits_from({2, -2, -2, -2})).values[0], 1.9281, 1e-4);
}

TEST(Rba, SaturationApproachesK) {
  const double score = score_rba(logits_from({-9, -9, -9, -9})).values[0];
  EXPECT_NEAR(score, 4.0 * std::tanh(9.0), 1e-12);
  EXPECT_GT(score, 3.99);
}

TEST(Baselines, UniformLogitsClosedForms) {
  const Tensor logits = logits_from({0.3, 0.3, 0.3, 0.3});
  EXPECT_NEAR(score_msp(logits).values[0], 0.75, 1e-12);
  EXPECT_NEAR(score_entropy(logits).values[0], std::log(4.0), 1e-12);
}

TEST(Baselines, SoftmaxOracleOnPair) {
  EXPECT_NEAR(score_msp(logits_from({2, 0})).values[0], 1.0 - 0.8808, 1e-4);
}

TEST(Baselines, EnergyLogSumExp) {
  EXPECT_NEAR(score_energy(logits_from({0, 0})).values[0], -std::log(2.0), 1e-12);
  EXPECT_NEAR(score_maxlogit(logits_from({1.5, -2.0})).values[0], -1.5, 1e-12);
}

TEST(Scores, BoundarySuppressionGap) {
  // Normalized gap g(s) = (s(boundary) - s(inlier)) / (s(outlier) - s(inlier)).
  const Tensor inlier = logits_from({8, -9, -9, -9});
  const Tensor boundary = logits_from({1.5, 1.5, -9, -9});
  const Tensor outlier = logits_from({-9, -9, -9, -9});
  auto gap = [&](ScoreFn fn) {
    const double s_in = apply_score_fn(fn, inlier).values[0];
    const double s_bnd = apply_score_fn(fn, boundary).values[0];
    const double s_out = apply_score_fn(fn, outlier).values[0];
    return (s_bnd - s_in) / (s_out - s_in);
  };
  const double g_rba = gap(ScoreFn::kRbA);
  const double g_maxlogit = gap(ScoreFn::kMaxLogit);
  EXPECT_LT(g_rba, 0.0);
  EXPECT_GT(g_maxlogit, 0.0);
  EXPECT_NEAR(g_rba, -0.905, 5e-3);
  EXPECT_NEAR(g_maxlogit, 0.382, 5e-3);
}

TEST(Scores, RbaMonotoneInEachLogit) {
  Xoshiro256ss rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor logits({4, 1, 1});
    for (std::size_t c = 0; c < 4; ++c) logits[c] = rng.uniform(-6.0, 6.0);
    const double base = score_rba(logits).values[0];
    Tensor lowered = logits;
    lowered[static_cast<std::size_t>(rng.uniform_int(4))] -= rng.uniform(0.0, 3.0);
    EXPECT_GE(score_rba(lowered).values[0], base - 1e-12);
  }
}

TEST(Scores, LabelPermutationInvariance) {
  Xoshiro256ss rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits({5, 1, 1});
    for (std::size_t c = 0; c < 5; ++c) logits[c] = rng.uniform(-4.0, 4.0);
    Tensor permuted({5, 1, 1});
    // Rotate the class channels.
    for (std::size_t c = 0; c < 5; ++c) permuted[(c + 2) % 5] = logits[c];
    for (const ScoreFn fn : {ScoreFn::kRbA, ScoreFn::kMsp, ScoreFn::kEntropy,
                             ScoreFn::kMaxLogit, ScoreFn::kEnergy}) {
      EXPECT_NEAR(apply_score_fn(fn, logits).values[0],
                  apply_score_fn(fn, permuted).values[0], 1e-12);
    }
  }
}

TEST(Scores, OrientationOneHotBelowAllRejected) {
  const Tensor one_hot = logits_from({9, -9, -9, -9});
  const Tensor rejected = logits_from({-9, -9, -9, -9});
  for (const ScoreFn fn : {ScoreFn::kRbA, ScoreFn::kMsp, ScoreFn::kEntropy,
                           ScoreFn::kMaxLogit, ScoreFn::kEnergy}) {
    EXPECT_LT(apply_score_fn(fn, one_hot).values[0], apply_score_fn(fn, rejected).values[0])
        << to_string(fn);
  }
}

TEST(ScoreScene, DeterministicAndConstantForZeroModel) {
  SceneConfig scene_cfg;
  scene_cfg.height = 12;
  scene_cfg.width = 12;
  ModelConfig model_cfg;
  model_cfg.in_channels = scene_cfg.channels;
  model_cfg.num_classes = scene_cfg.num_classes;
  const SceneGenerator gen(scene_cfg, 3);
  const Scene scene = gen.generate(0);

  const ModelParams params = init_params(model_cfg, 4);
  const ScoreMap a = score_scene(params, scene, ScoreFn::kRbA);
  const ScoreMap b = score_scene(params, scene, ScoreFn::kRbA);
  EXPECT_EQ(a, b);

  ModelParams zero = init_params(model_cfg, 4);
  for (auto& ref : param_registry(zero)) *ref.tensor = Tensor(ref.tensor->shape());
  const ScoreMap constant = score_scene(zero, scene, ScoreFn::kRbA);
  for (const double v : constant.values) EXPECT_NEAR(v, constant.values[0], 1e-12);
}

TEST(ScoreIo, RoundTripThroughF32IsExact) {
  ScoreMap map;
  map.height = 3;
  map.width = 2;
  Xoshiro256ss rng(8);
  for (int i = 0; i < 6; ++i)
    map.values.push_back(static_cast<double>(static_cast<float>(rng.gaussian())));
  const std::string path = temp_path("rba_scores_roundtrip.smap");
  write_score_map(map, path);
  const ScoreMap loaded = read_score_map(path);
  EXPECT_EQ(map, loaded);
  // Write(read(file)) reproduces the file bytes.
  const std::string path2 = temp_path("rba_scores_roundtrip2.smap");
  write_score_map(loaded, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  EXPECT_EQ(b1, b2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST(ScoreIo, BadMagicAndTruncationAreFormatErrors) {
  ScoreMap map;
  map.height = 2;
  map.width = 2;
  map.values = {1.0, 2.0, 3.0, 4.0};
  const std::string path = temp_path("rba_scores_bad.smap");
  write_score_map(map, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.put('Z');
  }
  try {
    read_score_map(path);
    FAIL() << "expected a format error";
  } catch (const EngineError& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kFormat);
  }
  write_score_map(map, path);
  std::filesystem::resize_file(path, 14);
  EXPECT_THROW(read_score_map(path), EngineError);
  std::remove(path.c_str());
}

TEST(ScoreIo, PgmIsBigEndian16Bit) {
  ScoreMap map;
  map.height = 1;
  map.width = 2;
  map.values = {0.0, 1.0};
  const std::string path = temp_path("rba_scores.pgm");
  write_score_pgm(map, path);
  std::ifstream in(path, std::ios::binary);
  std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string header = "P5\n2 1\n65535\n";
  ASSERT_EQ(raw.substr(0, header.size()), header);
  const unsigned char* px = reinterpret_cast<const unsigned char*>(raw.data() + header.size());
  EXPECT_EQ(px[0], 0x00);  // min maps to 0
  EXPECT_EQ(px[1], 0x00);
  EXPECT_EQ(px[2], 0xff);  // max maps to 65535, big-endian
  EXPECT_EQ(px[3], 0xff);
  std::remove(path.c_str());
}

}  // namespace
}  // namespace rba
