#pragma once

#include <optional>
#include <vector>

#include "rba/scene.hpp"
#include "rba/scoring.hpp"

namespace rba {

// Flattened scores with binary ground truth (outlier = positive); void
// pixels are dropped at construction.
struct PixelEvalSet {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;  // 1 = outlier

  void add(const ScoreMap& map, const LabelMap& gt);
  std::size_t positives() const;
  std::size_t negatives() const;
};

// Ranking metrics. Each returns nullopt when undefined (single-class
// input) rather than a placeholder value.
// AP: mean precision at the rank of each positive, equal scores grouped.
std::optional<double> average_precision(const PixelEvalSet& set);
// AuROC: P(score_pos > score_neg) + 0.5 P(equal) via average ranks.
std::optional<double> auroc(const PixelEvalSet& set);
// FPR at the largest observed threshold with TPR >= tpr_target
// (prediction rule: score >= threshold).
std::optional<double> fpr_at_tpr(const PixelEvalSet& set, double tpr_target = 0.95);
std::optional<double> threshold_at_tpr(const PixelEvalSet& set, double tpr_target = 0.95);

// Per-pixel argmax over the K aggregated logit channels.
std::vector<std::uint8_t> predict_labels(const Tensor& logits);

struct IouStats {
  std::vector<double> intersection;  // per class
  std::vector<double> union_;        // per class
  void accumulate(const std::vector<std::uint8_t>& pred, const LabelMap& gt, int num_classes);
};

struct IouReport {
  std::vector<double> per_class;     // NaN when the class is absent everywhere
  std::vector<bool> present;
  double mean = 0.0;                 // over present classes
};
IouReport iou_report(const IouStats& stats);
// Single pair convenience; pixels with non-inlier ground truth are excluded.
IouReport miou(const std::vector<std::uint8_t>& pred, const LabelMap& gt, int num_classes);

struct ComponentEvalConfig {
  std::vector<double> thresholds;    // default 0.25..0.75 step 0.05, ascending
  double tpr_target = 0.95;          // pixel-level binarization rule
  std::optional<double> threshold_override;
  int min_component_size = 1;        // applies to predicted components
  ComponentEvalConfig();
};

struct ComponentThresholdStats {
  double tau = 0.0;
  int tp = 0, fn = 0, fp = 0;
  double f1 = 0.0;
};

struct ComponentReport {
  double siou_gt = 0.0;              // mean over ground-truth components
  std::optional<double> ppv;         // mean over predicted components
  double mean_f1 = 0.0;              // mean over thresholds
  double binarization_threshold = 0.0;
  int gt_components = 0;
  int predicted_components = 0;
  std::vector<ComponentThresholdStats> per_threshold;
};

// SMIYC-style component metrics over an evaluated set of scored scenes.
// The prediction mask is score >= threshold, where the threshold is the
// pixel-level value reaching the configured TPR on the pooled set.
// Components are 8-connected. Undefined when the set has no ground-truth
// outlier components.
std::optional<ComponentReport> component_metrics(
    const std::vector<ScoreMap>& scores, const std::vector<LabelMap>& labels,
    const ComponentEvalConfig& config);

}  // namespace rba
