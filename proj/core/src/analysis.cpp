#include "rba/analysis.hpp"

#include <cmath>
#include <limits>

#include "rba/errors.hpp"

namespace rba {

SpecializationResult specialization_matrix(const ModelParams& params,
                                           const std::vector<Scene>& scenes,
                                           double conf_threshold) {
  const std::size_t n = static_cast<std::size_t>(params.config.num_queries);
  const std::size_t k = static_cast<std::size_t>(params.config.num_classes);

  SpecializationResult result;
  result.counts = Tensor({n, k});
  for (const Scene& scene : scenes) {
    const ModelOutput out = forward(params, scene.features);
    for (std::size_t q = 0; q < n; ++q)
      for (std::size_t c = 0; c < k; ++c)
        if (out.class_probs.at(q, c) > conf_threshold) result.counts.at(q, c) += 1.0;
  }

  result.class_to_query.assign(k, -1);
  for (std::size_t c = 0; c < k; ++c) {
    double best = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
      if (result.counts.at(q, c) > best) {
        best = result.counts.at(q, c);
        result.class_to_query[c] = static_cast<int>(q);
      }
    }
  }
  result.query_to_class.assign(n, -1);
  for (std::size_t q = 0; q < n; ++q) {
    double best = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (result.counts.at(q, c) > best) {
        best = result.counts.at(q, c);
        result.query_to_class[q] = static_cast<int>(c);
      }
    }
  }
  return result;
}

std::vector<MaskingAblationRow> masking_ablation(const ModelParams& params,
                                                 const std::vector<Scene>& scenes,
                                                 double conf_threshold) {
  const int num_classes = params.config.num_classes;
  const SpecializationResult spec = specialization_matrix(params, scenes, conf_threshold);

  std::vector<MaskingAblationRow> rows(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    rows[static_cast<std::size_t>(c)].class_id = c;
    rows[static_cast<std::size_t>(c)].query = spec.class_to_query[static_cast<std::size_t>(c)];
  }

  // Pools intersection/union across the dataset, as in standard semantic
  // segmentation evaluation.
  IouStats none_stats;
  std::vector<double> hard_inter(static_cast<std::size_t>(num_classes), 0.0);
  std::vector<double> hard_union(static_cast<std::size_t>(num_classes), 0.0);
  std::vector<double> soft_inter(static_cast<std::size_t>(num_classes), 0.0);
  std::vector<double> soft_union(static_cast<std::size_t>(num_classes), 0.0);

  for (const Scene& scene : scenes) {
    const ModelOutput full = forward(params, scene.features);
    none_stats.accumulate(predict_labels(full.logits), scene.labels, num_classes);

    for (int c = 0; c < num_classes; ++c) {
      const int q = rows[static_cast<std::size_t>(c)].query;
      if (q < 0) continue;
      for (const MaskMode mode : {MaskMode::kHard, MaskMode::kSoft}) {
        const ModelOutput masked = forward_masked(params, scene.features, q, mode);
        auto& inter = mode == MaskMode::kHard ? hard_inter : soft_inter;
        auto& uni = mode == MaskMode::kHard ? hard_union : soft_union;
        const std::size_t hw = scene.labels.size();
        for (std::size_t p = 0; p < hw; ++p) {
          const std::uint8_t g = scene.labels.codes[p];
          if (g >= num_classes) continue;
          const bool predicted = masked.memberships[p] > 0.5;
          const bool truth = g == c;
          if (predicted && truth) {
            inter[static_cast<std::size_t>(c)] += 1.0;
            uni[static_cast<std::size_t>(c)] += 1.0;
          } else if (predicted || truth) {
            uni[static_cast<std::size_t>(c)] += 1.0;
          }
        }
      }
    }
  }

  const IouReport none_report = iou_report(none_stats);
  for (int c = 0; c < num_classes; ++c) {
    MaskingAblationRow& row = rows[static_cast<std::size_t>(c)];
    if (row.query < 0) continue;
    const std::size_t ci = static_cast<std::size_t>(c);
    if (!none_report.present[ci] || hard_union[ci] <= 0.0 || soft_union[ci] <= 0.0) continue;
    row.defined = true;
    row.iou_none = none_report.per_class[ci];
    row.iou_hard = hard_inter[ci] / hard_union[ci];
    row.iou_soft = soft_inter[ci] / soft_union[ci];
  }
  return rows;
}

LogitModeReport cluster_logit_modes(const Tensor& points,
                                    const std::vector<std::uint8_t>& outlier_flags,
                                    int k_clusters, std::uint64_t seed,
                                    std::vector<int>* assignments_out) {
  require(points.rank() == 2, ErrorCategory::kInvalid, "logit modes: points must be [n, K]");
  require(points.dim(0) == outlier_flags.size(), ErrorCategory::kInvalid,
          "logit modes: flag count mismatch");
  require(points.dim(0) >= static_cast<std::size_t>(k_clusters), ErrorCategory::kInvalid,
          "logit modes: fewer pixels than clusters");

  const KMeansResult km = kmeans(points, k_clusters, seed);
  const std::size_t n = points.dim(0);
  const std::size_t dims = points.dim(1);
  const std::size_t kc = static_cast<std::size_t>(k_clusters);

  LogitModeReport report;
  report.centroids = km.centroids;
  report.sizes.assign(kc, 0);
  report.outlier_share.assign(kc, 0.0);
  report.mean_max_logit.assign(kc, 0.0);
  report.total_pixels = n;

  std::vector<double> max_sum(kc, 0.0);
  std::vector<std::size_t> outlier_counts(kc, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = static_cast<std::size_t>(km.assignments[i]);
    report.sizes[c] += 1;
    double max_logit = points.at(i, 0);
    for (std::size_t j = 1; j < dims; ++j) max_logit = std::max(max_logit, points.at(i, j));
    max_sum[c] += max_logit;
    if (outlier_flags[i]) {
      ++outlier_counts[c];
      ++report.outlier_pixels;
    }
  }

  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < kc; ++c) {
    report.mean_max_logit[c] =
        report.sizes[c] > 0 ? max_sum[c] / static_cast<double>(report.sizes[c])
                            : std::numeric_limits<double>::quiet_NaN();
    if (report.outlier_pixels > 0)
      report.outlier_share[c] =
          static_cast<double>(outlier_counts[c]) / static_cast<double>(report.outlier_pixels);
    if (report.sizes[c] > 0 && report.mean_max_logit[c] < lowest) {
      lowest = report.mean_max_logit[c];
      report.lowest_maxlogit_cluster = static_cast<int>(c);
    }
  }
  if (assignments_out) *assignments_out = km.assignments;
  return report;
}

LogitModeReport logit_mode_analysis(const ModelParams& params,
                                    const std::vector<Scene>& scenes, int k_clusters,
                                    std::uint64_t seed) {
  require(!scenes.empty(), ErrorCategory::kInvalid, "logit modes: no scenes");
  const std::size_t k = static_cast<std::size_t>(params.config.num_classes);

  std::vector<double> data;
  std::vector<std::uint8_t> flags;
  for (const Scene& scene : scenes) {
    const ModelOutput out = forward(params, scene.features);
    const std::size_t hw = scene.labels.size();
    for (std::size_t p = 0; p < hw; ++p) {
      if (scene.labels.codes[p] == kVoidCode) continue;
      for (std::size_t c = 0; c < k; ++c) data.push_back(out.logits[c * hw + p]);
      flags.push_back(scene.labels.codes[p] == kOutlierCode ? 1 : 0);
    }
  }
  const Tensor points({flags.size(), k}, std::move(data));
  return cluster_logit_modes(points, flags, k_clusters, seed);
}

}  // namespace rba
