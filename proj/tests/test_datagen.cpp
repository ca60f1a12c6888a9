#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rba/errors.hpp"
#include "rba/prng.hpp"
#include "rba/scene.hpp"
#include "rba/scene_io.hpp"

namespace rba {
namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

TEST(Signatures, UnitNormAndPairwiseSeparation) {
  const int channels = 8, count = 5;
  const Tensor sig = make_class_signatures(channels, count, 99);
  const double max_cos = std::cos(30.0 * M_PI / 180.0);
  for (int i = 0; i < count; ++i) {
    double norm = 0.0;
    for (int j = 0; j < channels; ++j) norm += sig.at(i, j) * sig.at(i, j);
    EXPECT_NEAR(norm, 1.0, 1e-12);
    for (int k = i + 1; k < count; ++k) {
      double dot = 0.0;
      for (int j = 0; j < channels; ++j) dot += sig.at(i, j) * sig.at(k, j);
      EXPECT_LE(std::abs(dot), max_cos + 1e-12);
    }
  }
}

TEST(Signatures, CapacityErrorIsExplicit) {
  // 40 rows with >= 30 degree pairwise separation cannot fit in 2 channels.
  EXPECT_THROW(make_class_signatures(2, 40, 1), EngineError);
}

TEST(SceneGen, NoiselessSingleClassIsConstant) {
  SceneConfig cfg;
  cfg.num_classes = 1;
  cfg.noise_sigma = 0.0;
  const SceneGenerator gen(cfg, 5);
  const Scene scene = gen.generate(0);
  const std::size_t plane = static_cast<std::size_t>(cfg.height) * cfg.width;
  for (int c = 0; c < cfg.channels; ++c) {
    const double expected =
        static_cast<double>(static_cast<float>(gen.signatures().at(0, static_cast<std::size_t>(c))));
    for (std::size_t p = 0; p < plane; ++p)
      EXPECT_EQ(scene.features[static_cast<std::size_t>(c) * plane + p], expected);
  }
}

TEST(SceneGen, DeterministicGivenSeed) {
  const SceneConfig cfg;
  const SceneGenerator a(cfg, 17), b(cfg, 17);
  EXPECT_TRUE(same_content(a.generate(3), b.generate(3)));
  EXPECT_FALSE(same_content(a.generate(3), a.generate(4)));
}

TEST(SceneGen, EveryClassPresentInAlmostEveryScene) {
  const SceneConfig cfg;  // default generation parameters
  const SceneGenerator gen(cfg, 2024);
  const int scenes = 200;
  std::vector<int> present(static_cast<std::size_t>(cfg.num_classes), 0);
  for (int i = 0; i < scenes; ++i) {
    const Scene scene = gen.generate(static_cast<std::uint64_t>(i));
    std::vector<bool> seen(static_cast<std::size_t>(cfg.num_classes), false);
    for (const std::uint8_t code : scene.labels.codes)
      if (code < cfg.num_classes) seen[code] = true;
    for (int c = 0; c < cfg.num_classes; ++c)
      present[static_cast<std::size_t>(c)] += seen[static_cast<std::size_t>(c)] ? 1 : 0;
  }
  for (int c = 0; c < cfg.num_classes; ++c)
    EXPECT_GE(present[static_cast<std::size_t>(c)], static_cast<int>(0.95 * scenes))
        << "class " << c;
}

TEST(SceneGen, VoidBorderRing) {
  const SceneConfig cfg;
  const SceneGenerator gen(cfg, 3);
  const Scene scene = gen.generate(0);
  for (int x = 0; x < cfg.width; ++x) {
    EXPECT_EQ(scene.labels.at(0, x), kVoidCode);
    EXPECT_EQ(scene.labels.at(cfg.height - 1, x), kVoidCode);
  }
  for (int y = 0; y < cfg.height; ++y) {
    EXPECT_EQ(scene.labels.at(y, 0), kVoidCode);
    EXPECT_EQ(scene.labels.at(y, cfg.width - 1), kVoidCode);
  }
  // Interior carries only class codes.
  for (int y = 1; y < cfg.height - 1; ++y)
    for (int x = 1; x < cfg.width - 1; ++x)
      EXPECT_LT(scene.labels.at(y, x), cfg.num_classes);
}

TEST(PasteOutlier, ZeroProbabilityIsIdentity) {
  const SceneConfig cfg;
  const SceneGenerator gen(cfg, 8);
  const OutlierBank bank = build_outlier_bank(cfg, gen.signatures(), 10, 4);
  const Scene scene = gen.generate(0);
  EXPECT_TRUE(same_content(scene, paste_outlier(scene, bank, 0.0, 5)));
}

TEST(PasteOutlier, CertainPasteAddsOutlierPixels) {
  const SceneConfig cfg;
  const SceneGenerator gen(cfg, 8);
  const OutlierBank bank = build_outlier_bank(cfg, gen.signatures(), 10, 4);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene pasted = paste_outlier(gen.generate(seed), bank, 1.0, seed);
    std::size_t outliers = 0;
    for (const std::uint8_t code : pasted.labels.codes)
      if (code == kOutlierCode) ++outliers;
    EXPECT_GE(outliers, 1u);
  }
}

TEST(PasteOutlier, FrequencyMatchesBinomialOracle) {
  const SceneConfig cfg;
  const SceneGenerator gen(cfg, 21);
  const OutlierBank bank = build_outlier_bank(cfg, gen.signatures(), 5, 6);
  const Scene scene = gen.generate(0);
  const int trials = 10000;
  const double p_out = 0.1;
  int pasted = 0;
  for (int t = 0; t < trials; ++t) {
    const Scene result = paste_outlier(scene, bank, p_out, static_cast<std::uint64_t>(t));
    if (!same_content(result, scene)) ++pasted;
  }
  // Binomial(10000, 0.1): three sigma is about 0.009.
  EXPECT_NEAR(static_cast<double>(pasted) / trials, p_out, 0.01);
}

TEST(PasteOutlier, TemplateLargerThanFrameThrows) {
  SceneConfig big;
  big.height = 64;
  big.width = 64;
  const SceneGenerator big_gen(big, 1);
  OutlierBank bank = build_outlier_bank(big, big_gen.signatures(), 3, 2);
  bank.templates[0].height = 128;
  bank.templates[0].width = 128;
  bank.templates[0].stencil.assign(128 * 128, 1);
  bank.templates.resize(1);
  SceneConfig small = big;
  small.height = 16;
  small.width = 16;
  const SceneGenerator small_gen(small, 1);
  const Scene scene = small_gen.generate(0);
  EXPECT_THROW(paste_outlier(scene, bank, 1.0, 3), EngineError);
}

TEST(PasteOutlier, OutlierSignatureSeparatedFromInliers) {
  const SceneConfig cfg;
  const SceneGenerator gen(cfg, 33);
  const Tensor& sig = gen.signatures();
  const double max_cos = std::cos(30.0 * M_PI / 180.0);
  const std::size_t outlier_row = static_cast<std::size_t>(cfg.num_classes);
  for (int c = 0; c < cfg.num_classes; ++c) {
    double dot = 0.0;
    for (int j = 0; j < cfg.channels; ++j)
      dot += sig.at(static_cast<std::size_t>(c), static_cast<std::size_t>(j)) *
             sig.at(outlier_row, static_cast<std::size_t>(j));
    EXPECT_LE(std::abs(dot), max_cos + 1e-12);
  }
}

TEST(SceneIo, RoundTripIsBitIdentical) {
  const SceneConfig cfg;
  const SceneGenerator gen(cfg, 55);
  const OutlierBank bank = build_outlier_bank(cfg, gen.signatures(), 4, 9);
  const Scene scene = paste_outlier(gen.generate(2), bank, 1.0, 1);
  const std::string path = temp_path("rba_scene_roundtrip.mseg");
  write_scene(scene, path);
  const Scene loaded = read_scene(path);
  EXPECT_TRUE(same_content(scene, loaded));
  EXPECT_EQ(loaded.meta.num_classes, cfg.num_classes);
  std::remove(path.c_str());
}

TEST(SceneIo, CorruptedMagicIsFormatError) {
  const SceneConfig cfg;
  const SceneGenerator gen(cfg, 55);
  const std::string path = temp_path("rba_scene_badmagic.mseg");
  write_scene(gen.generate(0), path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  try {
    read_scene(path);
    FAIL() << "expected a format error";
  } catch (const EngineError& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kFormat);
  }
  std::remove(path.c_str());
}

TEST(SceneIo, TruncatedPayloadIsFormatError) {
  const SceneConfig cfg;
  const SceneGenerator gen(cfg, 55);
  const std::string path = temp_path("rba_scene_truncated.mseg");
  write_scene(gen.generate(0), path);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 7);
  try {
    read_scene(path);
    FAIL() << "expected a format error";
  } catch (const EngineError& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kFormat);
  }
  std::remove(path.c_str());
}

TEST(SceneIo, MissingFileIsIoError) {
  try {
    read_scene(temp_path("rba_no_such_scene.mseg"));
    FAIL() << "expected an io error";
  } catch (const EngineError& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kIo);
  }
}

TEST(Bank, DeterministicAndFixedSize) {
  const SceneConfig cfg;
  const SceneGenerator gen(cfg, 12);
  const OutlierBank a = build_outlier_bank(cfg, gen.signatures(), 300, 7);
  const OutlierBank b = build_outlier_bank(cfg, gen.signatures(), 300, 7);
  ASSERT_EQ(a.size(), 300u);
  ASSERT_EQ(b.size(), 300u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.templates[i].stencil, b.templates[i].stencil);
  }
  EXPECT_EQ(a.signature, b.signature);
}

}  // namespace
}  // namespace rba
