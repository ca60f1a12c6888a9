#include "rba/pipeline.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "rba/checkpoint.hpp"
#include "rba/errors.hpp"

namespace fs = std::filesystem;

namespace rba {
namespace {

// Small end-to-end configuration that keeps the pipeline tests quick.
ExperimentConfig quick_config() {
  ExperimentConfig cfg;
  cfg.seed = 7;
  cfg.scene.height = 16;
  cfg.scene.width = 16;
  cfg.scene.channels = 4;
  cfg.scene.num_classes = 3;
  cfg.scene.min_shapes = 2;
  cfg.scene.max_shapes = 4;
  cfg.train_scenes = 8;
  cfg.test_scenes = 4;
  cfg.bank_size = 6;
  cfg.embed_dim = 8;
  cfg.num_queries = 5;
  cfg.train_iterations = 12;
  cfg.batch_size = 4;
  cfg.finetune_iterations = 6;
  cfg.analysis_scenes = 4;
  return cfg;
}

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("rba_pipeline_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string path(const std::string& leaf) const { return (root_ / leaf).string(); }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }

  static std::vector<std::string> dir_listing(const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
      if (entry.is_regular_file()) names.push_back(fs::relative(entry.path(), dir).string());
    std::sort(names.begin(), names.end());
    return names;
  }

  fs::path root_;
};

TEST_F(PipelineTest, ConfigParsingRejectsUnknownKeys) {
  EXPECT_THROW(parse_config_text("data.heigth = 12\n"), EngineError);
  try {
    parse_config_text("no_such_key = 1\n");
    FAIL() << "expected a config error";
  } catch (const EngineError& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kConfig);
  }
}

TEST_F(PipelineTest, ConfigRoundTripsThroughResolvedText) {
  ExperimentConfig cfg = quick_config();
  cfg.alpha = 2.5;
  cfg.score_fn = ScoreFn::kEnergy;
  const ExperimentConfig reparsed = parse_config_text(cfg.resolved());
  EXPECT_EQ(reparsed.resolved(), cfg.resolved());
  EXPECT_EQ(reparsed.config_hash(), cfg.config_hash());
}

TEST_F(PipelineTest, CommentsAndDefaultsParse) {
  const ExperimentConfig cfg = parse_config_text(
      "# comment line\n"
      "seed = 9   # trailing comment\n"
      "\n"
      "finetune.alpha = 3\n");
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.alpha, 3.0);
  EXPECT_EQ(cfg.train_iterations, 3000);  // untouched default
}

TEST_F(PipelineTest, GenWritesManifestAndScenes) {
  const ExperimentConfig cfg = quick_config();
  cmd_gen(cfg, path("data"));
  EXPECT_TRUE(fs::exists(root_ / "data" / "manifest.txt"));
  EXPECT_TRUE(fs::exists(root_ / "data" / "config.resolved"));
  EXPECT_EQ(load_split(path("data"), "train").size(), 8u);
  EXPECT_EQ(load_split(path("data"), "test").size(), 4u);
  const std::vector<Scene> ood = load_split(path("data"), "test_ood");
  ASSERT_EQ(ood.size(), 4u);
  for (const Scene& scene : ood) {
    std::size_t outliers = 0;
    for (const std::uint8_t code : scene.labels.codes)
      if (code == kOutlierCode) ++outliers;
    EXPECT_GT(outliers, 0u);
  }
  EXPECT_EQ(slurp(path("data") + "/config.resolved"), cfg.resolved());
}

TEST_F(PipelineTest, FullPipelineRerunIsByteIdentical) {
  const ExperimentConfig cfg = quick_config();
  for (const std::string run : {"a", "b"}) {
    cmd_gen(cfg, path("data_" + run));
    cmd_train(cfg, path("data_" + run), path("train_" + run));
    cmd_finetune(cfg, path("train_" + run) + "/checkpoint.txt", path("data_" + run),
                 path("ft_" + run));
    cmd_score(cfg, path("ft_" + run) + "/checkpoint.txt", path("data_" + run), "test_ood",
              path("scores_" + run));
    cmd_eval(cfg, path("scores_" + run), path("data_" + run), path("eval_" + run));
    cmd_analyze(cfg, path("ft_" + run) + "/checkpoint.txt", path("data_" + run),
                path("analyze_" + run));
  }
  for (const std::string stage : {"data", "train", "ft", "scores", "eval", "analyze"}) {
    const fs::path a = root_ / (stage + "_a");
    const fs::path b = root_ / (stage + "_b");
    const auto names = dir_listing(a);
    ASSERT_EQ(names, dir_listing(b)) << stage;
    for (const auto& name : names)
      EXPECT_EQ(slurp((a / name).string()), slurp((b / name).string())) << stage << "/" << name;
  }
}

TEST_F(PipelineTest, EvalOnInlierOnlySplitMarksRankingMetricsUndefined) {
  const ExperimentConfig cfg = quick_config();
  cmd_gen(cfg, path("data"));
  cmd_train(cfg, path("data"), path("train"));
  cmd_score(cfg, path("train") + "/checkpoint.txt", path("data"), "test", path("scores"));
  const MetricsReport report = cmd_eval(cfg, path("scores"), path("data"), path("eval"));
  EXPECT_FALSE(report.ap.has_value());
  EXPECT_FALSE(report.auroc.has_value());
  EXPECT_FALSE(report.fpr95.has_value());
  const std::string text = slurp(path("eval") + "/metrics.txt");
  EXPECT_NE(text.find("pixel.ap = undefined"), std::string::npos);
  // Closed-set IoU is still reported.
  EXPECT_NE(text.find("closed_set.miou = "), std::string::npos);
}

TEST_F(PipelineTest, MismatchedConfigIsRejected) {
  const ExperimentConfig cfg = quick_config();
  cmd_gen(cfg, path("data"));
  ExperimentConfig other = cfg;
  other.seed = 8;
  try {
    cmd_train(other, path("data"), path("train"));
    FAIL() << "expected a mismatch error";
  } catch (const EngineError& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kMismatch);
  }
}

TEST_F(PipelineTest, MissingInputIsAnIoError) {
  try {
    cmd_train(quick_config(), path("nonexistent"), path("train"));
    FAIL() << "expected an io error";
  } catch (const EngineError& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kIo);
  }
}

TEST_F(PipelineTest, CheckpointConfigMismatchIsDetected) {
  const ExperimentConfig cfg = quick_config();
  cmd_gen(cfg, path("data"));
  cmd_train(cfg, path("data"), path("train"));
  ExperimentConfig wider = cfg;
  wider.num_queries = 7;
  cmd_gen(wider, path("data_wider"));
  try {
    cmd_score(wider, path("train") + "/checkpoint.txt", path("data_wider"), "test",
              path("scores"));
    FAIL() << "expected a mismatch error";
  } catch (const EngineError& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kMismatch);
  }
}

TEST_F(PipelineTest, GradcheckCommandPasses) {
  const GradcheckReport report = cmd_gradcheck(quick_config(), path("gradcheck"));
  EXPECT_TRUE(report.pass);
  EXPECT_TRUE(fs::exists(root_ / "gradcheck" / "gradcheck.txt"));
}

TEST_F(PipelineTest, LabelMapRoundTrip) {
  LabelMap labels;
  labels.height = 3;
  labels.width = 2;
  labels.codes = {0, 1, 2, kOutlierCode, kVoidCode, 1};
  write_label_map(labels, path("pred.lmap"));
  EXPECT_EQ(read_label_map(path("pred.lmap")), labels);
}

}  // namespace
}  // namespace rba
