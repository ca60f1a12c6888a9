#include "rba/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rba/errors.hpp"

namespace rba {

void PixelEvalSet::add(const ScoreMap& map, const LabelMap& gt) {
  require(map.height == gt.height && map.width == gt.width, ErrorCategory::kInvalid,
          "eval set: score/label shape mismatch");
  for (std::size_t p = 0; p < map.size(); ++p) {
    if (gt.codes[p] == kVoidCode) continue;
    scores.push_back(map.values[p]);
    labels.push_back(gt.codes[p] == kOutlierCode ? 1 : 0);
  }
}

std::size_t PixelEvalSet::positives() const {
  std::size_t n = 0;
  for (const std::uint8_t l : labels) n += l;
  return n;
}

std::size_t PixelEvalSet::negatives() const { return labels.size() - positives(); }

namespace {

// Indices sorted by descending score; equal scores keep input order.
std::vector<std::size_t> sort_desc(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

std::optional<double> average_precision(const PixelEvalSet& set) {
  const std::size_t pos = set.positives();
  if (pos == 0) return std::nullopt;
  const auto order = sort_desc(set.scores);

  double ap_sum = 0.0;
  std::size_t cum_tp = 0, cum_fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    // Equal scores form one threshold group.
    std::size_t j = i;
    std::size_t group_tp = 0, group_fp = 0;
    while (j < order.size() && set.scores[order[j]] == set.scores[order[i]]) {
      if (set.labels[order[j]]) ++group_tp;
      else ++group_fp;
      ++j;
    }
    cum_tp += group_tp;
    cum_fp += group_fp;
    const double precision = static_cast<double>(cum_tp) / static_cast<double>(cum_tp + cum_fp);
    ap_sum += static_cast<double>(group_tp) * precision;
    i = j;
  }
  return ap_sum / static_cast<double>(pos);
}

std::optional<double> auroc(const PixelEvalSet& set) {
  const std::size_t pos = set.positives();
  const std::size_t neg = set.negatives();
  if (pos == 0 || neg == 0) return std::nullopt;

  // Mann-Whitney statistic with average ranks over tie groups.
  std::vector<std::size_t> order(set.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&set](std::size_t a, std::size_t b) {
    return set.scores[a] < set.scores[b];
  });

  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    while (j < order.size() && set.scores[order[j]] == set.scores[order[i]]) {
      if (set.labels[order[j]]) ++group_pos;
      ++j;
    }
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    pos_rank_sum += avg_rank * static_cast<double>(group_pos);
    i = j;
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

namespace {

struct TprSweepPoint {
  double threshold = 0.0;
  double fpr = 0.0;
};

std::optional<TprSweepPoint> sweep_to_tpr(const PixelEvalSet& set, double tpr_target) {
  const std::size_t pos = set.positives();
  const std::size_t neg = set.negatives();
  if (pos == 0 || neg == 0) return std::nullopt;
  const auto order = sort_desc(set.scores);

  std::size_t cum_tp = 0, cum_fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && set.scores[order[j]] == set.scores[order[i]]) {
      if (set.labels[order[j]]) ++cum_tp;
      else ++cum_fp;
      ++j;
    }
    const double tpr = static_cast<double>(cum_tp) / static_cast<double>(pos);
    if (tpr >= tpr_target) {
      TprSweepPoint point;
      point.threshold = set.scores[order[i]];
      point.fpr = static_cast<double>(cum_fp) / static_cast<double>(neg);
      return point;
    }
    i = j;
  }
  // TPR reaches 1 at the lowest observed score, so this is unreachable for
  // tpr_target <= 1.
  return TprSweepPoint{set.scores[order.back()], 1.0};
}

}  // namespace

std::optional<double> fpr_at_tpr(const PixelEvalSet& set, double tpr_target) {
  const auto point = sweep_to_tpr(set, tpr_target);
  if (!point) return std::nullopt;
  return point->fpr;
}

std::optional<double> threshold_at_tpr(const PixelEvalSet& set, double tpr_target) {
  const auto point = sweep_to_tpr(set, tpr_target);
  if (!point) return std::nullopt;
  return point->threshold;
}

std::vector<std::uint8_t> predict_labels(const Tensor& logits) {
  require(logits.rank() == 3, ErrorCategory::kInvalid, "predict: logits must be [K, H, W]");
  const std::size_t k = logits.dim(0);
  const std::size_t hw = logits.dim(1) * logits.dim(2);
  std::vector<std::uint8_t> pred(hw, 0);
  for (std::size_t p = 0; p < hw; ++p) {
    std::size_t best = 0;
    double best_v = logits[p];
    for (std::size_t c = 1; c < k; ++c) {
      const double v = logits[c * hw + p];
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    pred[p] = static_cast<std::uint8_t>(best);
  }
  return pred;
}

void IouStats::accumulate(const std::vector<std::uint8_t>& pred, const LabelMap& gt,
                          int num_classes) {
  require(pred.size() == gt.size(), ErrorCategory::kInvalid, "iou: size mismatch");
  if (intersection.empty()) {
    intersection.assign(static_cast<std::size_t>(num_classes), 0.0);
    union_.assign(static_cast<std::size_t>(num_classes), 0.0);
  }
  for (std::size_t p = 0; p < pred.size(); ++p) {
    const std::uint8_t g = gt.codes[p];
    if (g >= num_classes) continue;  // outlier & void pixels excluded
    const std::uint8_t q = pred[p];
    if (q == g) {
      intersection[g] += 1.0;
      union_[g] += 1.0;
    } else {
      union_[g] += 1.0;
      if (q < num_classes) union_[q] += 1.0;
    }
  }
}

IouReport iou_report(const IouStats& stats) {
  IouReport report;
  report.per_class.assign(stats.union_.size(), std::numeric_limits<double>::quiet_NaN());
  report.present.assign(stats.union_.size(), false);
  double sum = 0.0;
  int count = 0;
  for (std::size_t c = 0; c < stats.union_.size(); ++c) {
    if (stats.union_[c] <= 0.0) continue;  // absent from both prediction and gt
    report.present[c] = true;
    report.per_class[c] = stats.intersection[c] / stats.union_[c];
    sum += report.per_class[c];
    ++count;
  }
  report.mean = count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
  return report;
}

IouReport miou(const std::vector<std::uint8_t>& pred, const LabelMap& gt, int num_classes) {
  IouStats stats;
  stats.accumulate(pred, gt, num_classes);
  return iou_report(stats);
}

ComponentEvalConfig::ComponentEvalConfig() {
  for (int i = 0; i <= 10; ++i) thresholds.push_back(0.25 + 0.05 * i);
}

namespace {

// 8-connected component labeling; returns component count, fills ids with
// -1 (background) or a component index, and appends pixel lists.
int label_components(const std::vector<std::uint8_t>& mask, int height, int width,
                     std::vector<int>& ids, std::vector<std::vector<std::size_t>>& pixels) {
  ids.assign(mask.size(), -1);
  pixels.clear();
  std::vector<std::size_t> stack;
  int next = 0;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || ids[start] != -1) continue;
    pixels.emplace_back();
    stack.push_back(start);
    ids[start] = next;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      pixels[static_cast<std::size_t>(next)].push_back(p);
      const int y = static_cast<int>(p) / width;
      const int x = static_cast<int>(p) % width;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx == 0) continue;
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= height || nx < 0 || nx >= width) continue;
          const std::size_t np = static_cast<std::size_t>(ny) * width + nx;
          if (mask[np] && ids[np] == -1) {
            ids[np] = next;
            stack.push_back(np);
          }
        }
      }
    }
    ++next;
  }
  return next;
}

}  // namespace

std::optional<ComponentReport> component_metrics(const std::vector<ScoreMap>& scores,
                                                 const std::vector<LabelMap>& labels,
                                                 const ComponentEvalConfig& config) {
  require(scores.size() == labels.size(), ErrorCategory::kInvalid,
          "component metrics: score/label count mismatch");
  for (std::size_t i = 1; i < config.thresholds.size(); ++i)
    require(config.thresholds[i] > config.thresholds[i - 1], ErrorCategory::kInvalid,
            "component metrics: thresholds must ascend");
  for (const double tau : config.thresholds)
    require(tau > 0.0 && tau < 1.0, ErrorCategory::kInvalid,
            "component metrics: thresholds must lie in (0, 1)");

  double threshold = 0.0;
  if (config.threshold_override) {
    threshold = *config.threshold_override;
  } else {
    PixelEvalSet pooled;
    for (std::size_t i = 0; i < scores.size(); ++i) pooled.add(scores[i], labels[i]);
    const auto t = threshold_at_tpr(pooled, config.tpr_target);
    if (!t) return std::nullopt;
    threshold = *t;
  }

  struct GtComponent {
    double siou = 0.0;
    std::size_t scene = 0;
    int id = 0;
  };
  struct PredComponent {
    double ppv = 0.0;
    std::size_t scene = 0;
    std::vector<int> touched_gt;  // gt component ids in the same scene
  };
  std::vector<GtComponent> gt_comps;
  std::vector<PredComponent> pred_comps;

  for (std::size_t s = 0; s < scores.size(); ++s) {
    const ScoreMap& map = scores[s];
    const LabelMap& gt = labels[s];
    const std::size_t hw = map.size();

    std::vector<std::uint8_t> pred_mask(hw, 0), gt_mask(hw, 0);
    for (std::size_t p = 0; p < hw; ++p) {
      if (gt.codes[p] == kVoidCode) continue;
      if (map.values[p] >= threshold) pred_mask[p] = 1;
      if (gt.codes[p] == kOutlierCode) gt_mask[p] = 1;
    }

    std::vector<int> gt_ids, pred_ids;
    std::vector<std::vector<std::size_t>> gt_pixels, pred_pixels;
    const int num_gt = label_components(gt_mask, map.height, map.width, gt_ids, gt_pixels);
    label_components(pred_mask, map.height, map.width, pred_ids, pred_pixels);

    // Drop undersized predicted components.
    std::vector<int> pred_remap(pred_pixels.size(), -1);
    std::vector<std::vector<std::size_t>> kept_pred;
    for (std::size_t c = 0; c < pred_pixels.size(); ++c) {
      if (pred_pixels[c].size() < static_cast<std::size_t>(config.min_component_size)) continue;
      pred_remap[c] = static_cast<int>(kept_pred.size());
      kept_pred.push_back(pred_pixels[c]);
    }
    for (std::size_t p = 0; p < hw; ++p)
      pred_ids[p] = pred_ids[p] >= 0 ? pred_remap[static_cast<std::size_t>(pred_ids[p])] : -1;

    // sIoU per ground-truth component.
    for (int g = 0; g < num_gt; ++g) {
      const auto& gpix = gt_pixels[static_cast<std::size_t>(g)];
      std::vector<bool> touching(kept_pred.size(), false);
      std::size_t inter = 0;
      for (const std::size_t p : gpix) {
        if (pred_ids[p] >= 0) {
          touching[static_cast<std::size_t>(pred_ids[p])] = true;
          ++inter;
        }
      }
      // predpix(g): pixels of touching predicted components, excluding
      // pixels inside other gt components; union with g itself.
      std::size_t union_size = gpix.size();
      for (std::size_t c = 0; c < kept_pred.size(); ++c) {
        if (!touching[c]) continue;
        for (const std::size_t p : kept_pred[c]) {
          if (gt_ids[p] == g) continue;                  // already counted in |g|
          if (gt_ids[p] >= 0) continue;                  // inside another gt component
          ++union_size;
        }
      }
      GtComponent comp;
      comp.siou = union_size > 0 ? static_cast<double>(inter) / static_cast<double>(union_size) : 0.0;
      comp.scene = s;
      comp.id = g;
      gt_comps.push_back(comp);
    }

    // PPV per predicted component.
    for (std::size_t c = 0; c < kept_pred.size(); ++c) {
      PredComponent comp;
      comp.scene = s;
      std::size_t hit = 0;
      std::vector<bool> seen(static_cast<std::size_t>(num_gt), false);
      for (const std::size_t p : kept_pred[c]) {
        if (gt_mask[p]) ++hit;
        if (gt_ids[p] >= 0 && !seen[static_cast<std::size_t>(gt_ids[p])]) {
          seen[static_cast<std::size_t>(gt_ids[p])] = true;
          comp.touched_gt.push_back(gt_ids[p]);
        }
      }
      comp.ppv = static_cast<double>(hit) / static_cast<double>(kept_pred[c].size());
      pred_comps.push_back(comp);
    }
  }

  if (gt_comps.empty()) return std::nullopt;

  ComponentReport report;
  report.binarization_threshold = threshold;
  report.gt_components = static_cast<int>(gt_comps.size());
  report.predicted_components = static_cast<int>(pred_comps.size());
  for (const auto& g : gt_comps) report.siou_gt += g.siou;
  report.siou_gt /= static_cast<double>(gt_comps.size());
  if (!pred_comps.empty()) {
    double sum = 0.0;
    for (const auto& p : pred_comps) sum += p.ppv;
    report.ppv = sum / static_cast<double>(pred_comps.size());
  }

  for (const double tau : config.thresholds) {
    ComponentThresholdStats stats;
    stats.tau = tau;
    for (const auto& g : gt_comps) {
      if (g.siou > tau) ++stats.tp;
      else ++stats.fn;
    }
    for (const auto& p : pred_comps) {
      if (p.ppv > tau) continue;
      bool touches_tp = false;
      for (const int g_id : p.touched_gt) {
        for (const auto& g : gt_comps) {
          if (g.scene == p.scene && g.id == g_id && g.siou > tau) {
            touches_tp = true;
            break;
          }
        }
        if (touches_tp) break;
      }
      if (!touches_tp) ++stats.fp;
    }
    const int denom = 2 * stats.tp + stats.fn + stats.fp;
    stats.f1 = denom > 0 ? 2.0 * stats.tp / denom : 0.0;
    report.per_threshold.push_back(stats);
    report.mean_f1 += stats.f1;
  }
  report.mean_f1 /= static_cast<double>(config.thresholds.size());
  return report;
}

}  // namespace rba
