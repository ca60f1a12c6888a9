#pragma once

#include <cstdint>
#include <vector>

#include "rba/kmeans.hpp"
#include "rba/metrics.hpp"
#include "rba/model.hpp"
#include "rba/scene.hpp"

namespace rba {

// counts[n, k]: how often query n predicts inlier class k with confidence
// above the threshold, over the given scenes (one event per scene/query).
struct SpecializationResult {
  Tensor counts;                   // [N, K]
  std::vector<int> class_to_query; // argmax over queries; -1 when no events
  std::vector<int> query_to_class; // argmax over classes; -1 when no events
};

SpecializationResult specialization_matrix(const ModelParams& params,
                                           const std::vector<Scene>& scenes,
                                           double conf_threshold = 0.98);

// Per-class IoU with no masking (full model, argmax prediction) and with
// only the class's specialized query under hard / soft masking (prediction:
// membership > 0.5). Rows without a specialized query are marked undefined.
struct MaskingAblationRow {
  int class_id = 0;
  int query = -1;
  bool defined = false;
  double iou_none = 0.0;
  double iou_hard = 0.0;
  double iou_soft = 0.0;
};

std::vector<MaskingAblationRow> masking_ablation(const ModelParams& params,
                                                 const std::vector<Scene>& scenes,
                                                 double conf_threshold = 0.98);

// Clusters the per-pixel K-vectors of aggregated logits with k-means and
// summarizes each cluster: centroid profile, size, share of all gt-outlier
// pixels, and mean max-logit.
struct LogitModeReport {
  Tensor centroids;                   // [k, K]
  std::vector<std::size_t> sizes;
  std::vector<double> outlier_share;  // fraction of all outlier pixels per cluster
  std::vector<double> mean_max_logit;
  int lowest_maxlogit_cluster = -1;
  std::size_t total_pixels = 0;
  std::size_t outlier_pixels = 0;
};

LogitModeReport logit_mode_analysis(const ModelParams& params,
                                    const std::vector<Scene>& scenes, int k_clusters,
                                    std::uint64_t seed);

// Clustering core shared with the planted-archetype checks: points are
// pixel logit vectors, flags mark gt-outlier pixels.
LogitModeReport cluster_logit_modes(const Tensor& points,
                                    const std::vector<std::uint8_t>& outlier_flags,
                                    int k_clusters, std::uint64_t seed,
                                    std::vector<int>* assignments_out = nullptr);

}  // namespace rba
