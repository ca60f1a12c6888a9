#include "rba/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "rba/prng.hpp"

namespace rba {
namespace {

PixelEvalSet make_set(const std::vector<double>& scores, const std::vector<int>& labels) {
  PixelEvalSet set;
  set.scores = scores;
  for (const int l : labels) set.labels.push_back(static_cast<std::uint8_t>(l));
  return set;
}

// Threshold-sweep oracles. AP integrates the PR step function over the
// distinct observed scores; AuROC counts concordant pairs; FPR@95 walks
// thresholds from above.
double oracle_ap(const PixelEvalSet& set) {
  std::vector<double> thresholds = set.scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  const double total_pos = static_cast<double>(set.positives());
  double ap = 0.0, prev_recall = 0.0;
  for (const double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < set.scores.size(); ++i) {
      if (set.scores[i] >= t) {
        if (set.labels[i]) ++tp;
        else ++fp;
      }
    }
    const double recall = tp / total_pos;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

double oracle_auroc(const PixelEvalSet& set) {
  double concordant = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < set.scores.size(); ++i) {
    if (!set.labels[i]) continue;
    for (std::size_t j = 0; j < set.scores.size(); ++j) {
      if (set.labels[j]) continue;
      ++pairs;
      if (set.scores[i] > set.scores[j]) concordant += 1.0;
      else if (set.scores[i] == set.scores[j]) concordant += 0.5;
    }
  }
  return concordant / static_cast<double>(pairs);
}

double oracle_fpr_at(const PixelEvalSet& set, double target) {
  std::vector<double> thresholds = set.scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  const double pos = static_cast<double>(set.positives());
  const double neg = static_cast<double>(set.negatives());
  for (const double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < set.scores.size(); ++i) {
      if (set.scores[i] >= t) {
        if (set.labels[i]) ++tp;
        else ++fp;
      }
    }
    if (tp / pos >= target) return fp / neg;
  }
  return 1.0;
}

TEST(AveragePrecision, HandExample) {
  const PixelEvalSet set = make_set({0.9, 0.8, 0.1}, {1, 0, 1});
  ASSERT_TRUE(average_precision(set).has_value());
  EXPECT_NEAR(*average_precision(set), (1.0 + 2.0 / 3.0) / 2.0, 1e-9);
}

TEST(AveragePrecision, PerfectSeparation) {
  const PixelEvalSet set = make_set({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
  EXPECT_NEAR(*average_precision(set), 1.0, 1e-12);
}

TEST(AveragePrecision, AllEqualScoresGiveBaseRate) {
  const PixelEvalSet set = make_set({0.5, 0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0, 0});
  EXPECT_NEAR(*average_precision(set), 2.0 / 5.0, 1e-12);
}

TEST(AveragePrecision, UndefinedWithoutPositives) {
  EXPECT_FALSE(average_precision(make_set({0.5, 0.4}, {0, 0})).has_value());
}

TEST(Auroc, HandExampleAndAntiSeparation) {
  EXPECT_NEAR(*auroc(make_set({0.9, 0.8, 0.1}, {1, 0, 1})), 0.5, 1e-12);
  const PixelEvalSet anti = make_set({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0});
  EXPECT_NEAR(*auroc(anti), 0.0, 1e-12);
  EXPECT_NEAR(*fpr_at_tpr(anti), 1.0, 1e-12);
}

TEST(Auroc, UndefinedOnSingleClass) {
  EXPECT_FALSE(auroc(make_set({0.5, 0.6}, {1, 1})).has_value());
  EXPECT_FALSE(fpr_at_tpr(make_set({0.5, 0.6}, {1, 1})).has_value());
}

TEST(FprAtTpr, ThresholdSweepExample) {
  const PixelEvalSet set = make_set({0.9, 0.8, 0.5, 0.4}, {1, 1, 0, 0});
  EXPECT_NEAR(*fpr_at_tpr(set), 0.0, 1e-12);
  EXPECT_NEAR(*threshold_at_tpr(set), 0.8, 1e-12);
}

TEST(RankingMetrics, MatchBruteForceOraclesIncludingTies) {
  Xoshiro256ss rng(2718);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(199);
    PixelEvalSet set;
    bool has_pos = false, has_neg = false;
    const bool tie_heavy = trial % 3 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = tie_heavy ? std::floor(rng.uniform() * 5.0) / 5.0 : rng.uniform();
      const bool pos = rng.uniform() < 0.3;
      set.scores.push_back(s);
      set.labels.push_back(pos ? 1 : 0);
      has_pos |= pos;
      has_neg |= !pos;
    }
    if (!has_pos || !has_neg) continue;
    EXPECT_NEAR(*average_precision(set), oracle_ap(set), 1e-9);
    EXPECT_NEAR(*auroc(set), oracle_auroc(set), 1e-9);
    EXPECT_NEAR(*fpr_at_tpr(set), oracle_fpr_at(set, 0.95), 1e-9);
  }
}

TEST(RankingMetrics, InvariantUnderStrictlyIncreasingMaps) {
  Xoshiro256ss rng(99);
  PixelEvalSet set;
  for (int i = 0; i < 400; ++i) {
    set.scores.push_back(rng.uniform(-3.0, 3.0));
    set.labels.push_back(rng.uniform() < 0.2 ? 1 : 0);
  }
  const double ap = *average_precision(set);
  const double auc = *auroc(set);
  const double fpr = *fpr_at_tpr(set);

  PixelEvalSet affine = set;
  for (double& s : affine.scores) s = 2.0 * s + 7.0;
  EXPECT_LT(std::abs(*average_precision(affine) - ap), 1e-12);
  EXPECT_LT(std::abs(*auroc(affine) - auc), 1e-12);
  EXPECT_LT(std::abs(*fpr_at_tpr(affine) - fpr), 1e-12);

  PixelEvalSet monotone = set;
  for (double& s : monotone.scores) s = std::atan(s) + 0.1 * s;
  EXPECT_LT(std::abs(*average_precision(monotone) - ap), 1e-12);
  EXPECT_LT(std::abs(*auroc(monotone) - auc), 1e-12);
  EXPECT_LT(std::abs(*fpr_at_tpr(monotone) - fpr), 1e-12);
}

LabelMap labels_from_codes(int h, int w, const std::vector<std::uint8_t>& codes) {
  LabelMap map;
  map.height = h;
  map.width = w;
  map.codes = codes;
  return map;
}

TEST(MeanIou, IdentityAndDisjointCases) {
  const LabelMap gt = labels_from_codes(2, 2, {0, 0, 1, 1});
  EXPECT_NEAR(miou(gt.codes, gt, 2).mean, 1.0, 1e-12);

  const std::vector<std::uint8_t> disjoint = {1, 1, 0, 0};
  const IouReport report = miou(disjoint, gt, 2);
  EXPECT_NEAR(report.per_class[0], 0.0, 1e-12);
  EXPECT_NEAR(report.per_class[1], 0.0, 1e-12);
}

TEST(MeanIou, HalfOverlapHandCount) {
  // 10x20 map, gt class 1 fills rows 0..9 of columns 0..9 (100 px);
  // prediction shifts it by 5 columns: intersection 50, union 150.
  LabelMap gt = labels_from_codes(10, 20, std::vector<std::uint8_t>(200, 0));
  std::vector<std::uint8_t> pred(200, 0);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) gt.at(y, x) = 1;
    for (int x = 5; x < 15; ++x) pred[static_cast<std::size_t>(y) * 20 + x] = 1;
  }
  const IouReport report = miou(pred, gt, 2);
  EXPECT_NEAR(report.per_class[1], 50.0 / 150.0, 1e-12);
}

TEST(MeanIou, ClassAbsentEverywhereIsExcluded) {
  const LabelMap gt = labels_from_codes(2, 2, {0, 0, 0, 0});
  const IouReport report = miou({0, 0, 0, 0}, gt, 3);
  EXPECT_TRUE(report.present[0]);
  EXPECT_FALSE(report.present[1]);
  EXPECT_FALSE(report.present[2]);
  EXPECT_NEAR(report.mean, 1.0, 1e-12);
}

ScoreMap map_from(int h, int w, const std::vector<double>& values) {
  ScoreMap map;
  map.height = h;
  map.width = w;
  map.values = values;
  return map;
}

TEST(ComponentMetrics, ExactPredictionScoresPerfectly) {
  // One 2x2 outlier block in an 6x6 inlier frame.
  std::vector<std::uint8_t> codes(36, 0);
  std::vector<double> scores(36, -1.0);
  for (const int p : {14, 15, 20, 21}) {
    codes[static_cast<std::size_t>(p)] = kOutlierCode;
    scores[static_cast<std::size_t>(p)] = 1.0;
  }
  const auto report = component_metrics({map_from(6, 6, scores)},
                                        {labels_from_codes(6, 6, codes)}, ComponentEvalConfig{});
  ASSERT_TRUE(report.has_value());
  EXPECT_NEAR(report->siou_gt, 1.0, 1e-12);
  ASSERT_TRUE(report->ppv.has_value());
  EXPECT_NEAR(*report->ppv, 1.0, 1e-12);
  EXPECT_NEAR(report->mean_f1, 1.0, 1e-12);
}

TEST(ComponentMetrics, HandCountedPartialOverlap) {
  // gt component: 10 pixels (rows 2..3, cols 1..5). Prediction: 5 of them
  // (row 2, cols 1..5) plus 5 pixels outside any gt (row 1, cols 1..5).
  // sIoU = 5 / 15, PPV = 0.5.
  std::vector<std::uint8_t> codes(8 * 8, 0);
  std::vector<double> scores(8 * 8, 0.0);
  for (int x = 1; x <= 5; ++x) {
    codes[static_cast<std::size_t>(2) * 8 + x] = kOutlierCode;
    codes[static_cast<std::size_t>(3) * 8 + x] = kOutlierCode;
    scores[static_cast<std::size_t>(2) * 8 + x] = 1.0;
    scores[static_cast<std::size_t>(1) * 8 + x] = 1.0;
  }
  ComponentEvalConfig cfg;
  cfg.threshold_override = 0.5;
  const auto report =
      component_metrics({map_from(8, 8, scores)}, {labels_from_codes(8, 8, codes)}, cfg);
  ASSERT_TRUE(report.has_value());
  EXPECT_NEAR(report->siou_gt, 5.0 / 15.0, 1e-12);
  ASSERT_TRUE(report->ppv.has_value());
  EXPECT_NEAR(*report->ppv, 0.5, 1e-12);
}

TEST(ComponentMetrics, EmptyPredictionGivesZeroSiouAndF1) {
  std::vector<std::uint8_t> codes(16, 0);
  codes[5] = kOutlierCode;
  codes[6] = kOutlierCode;
  ComponentEvalConfig cfg;
  cfg.threshold_override = 0.5;
  const auto report = component_metrics({map_from(4, 4, std::vector<double>(16, 0.0))},
                                        {labels_from_codes(4, 4, codes)}, cfg);
  ASSERT_TRUE(report.has_value());
  EXPECT_EQ(report->predicted_components, 0);
  EXPECT_NEAR(report->siou_gt, 0.0, 1e-12);
  EXPECT_FALSE(report->ppv.has_value());
  EXPECT_NEAR(report->mean_f1, 0.0, 1e-12);
}

TEST(ComponentMetrics, UndefinedWithoutGtComponents) {
  ComponentEvalConfig cfg;
  cfg.threshold_override = 0.5;
  const auto report =
      component_metrics({map_from(4, 4, std::vector<double>(16, 1.0))},
                        {labels_from_codes(4, 4, std::vector<std::uint8_t>(16, 0))}, cfg);
  EXPECT_FALSE(report.has_value());
}

TEST(ComponentMetrics, EightConnectivityJoinsDiagonals) {
  // Two diagonal outlier pixels form ONE component under 8-connectivity.
  std::vector<std::uint8_t> codes(16, 0);
  codes[0] = kOutlierCode;
  codes[5] = kOutlierCode;  // (1,1), diagonal neighbor of (0,0)
  std::vector<double> scores(16, 0.0);
  scores[0] = 1.0;
  scores[5] = 1.0;
  ComponentEvalConfig cfg;
  cfg.threshold_override = 0.5;
  const auto report =
      component_metrics({map_from(4, 4, scores)}, {labels_from_codes(4, 4, codes)}, cfg);
  ASSERT_TRUE(report.has_value());
  EXPECT_EQ(report->gt_components, 1);
  EXPECT_EQ(report->predicted_components, 1);
}

TEST(ComponentMetrics, VoidPixelsExcludedFromPpvDenominator) {
  // Prediction covers one outlier pixel and one void pixel; PPV counts
  // only the non-void pixel, so PPV = 1.
  std::vector<std::uint8_t> codes(16, 0);
  codes[5] = kOutlierCode;
  codes[6] = kVoidCode;
  std::vector<double> scores(16, 0.0);
  scores[5] = 1.0;
  scores[6] = 1.0;
  ComponentEvalConfig cfg;
  cfg.threshold_override = 0.5;
  const auto report =
      component_metrics({map_from(4, 4, scores)}, {labels_from_codes(4, 4, codes)}, cfg);
  ASSERT_TRUE(report.has_value());
  ASSERT_TRUE(report->ppv.has_value());
  EXPECT_NEAR(*report->ppv, 1.0, 1e-12);
}

}  // namespace
}  // namespace rba
