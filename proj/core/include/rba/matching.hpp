#pragma once

#include <vector>

#include "rba/model.hpp"
#include "rba/scene.hpp"

namespace rba {

// One binary mask per inlier class present in the scene. `valid` marks the
// pixels that participate in mask losses: inlier pixels only (outlier and
// void pixels are excluded).
struct GtMask {
  int class_id = 0;
  std::vector<std::uint8_t> mask;  // H*W, 1 inside the class region
  std::size_t area = 0;
};

struct GtMaskSet {
  int height = 0, width = 0;
  std::vector<GtMask> masks;
  std::vector<std::uint8_t> valid;  // H*W
  std::size_t valid_count = 0;
};

GtMaskSet gt_masks_from_labels(const LabelMap& labels, int num_classes);

struct LossWeights {
  double cls = 2.0;
  double bce = 5.0;
  double dice = 5.0;
  double no_object = 0.1;  // down-weight on unmatched queries' class term
};

// cost[g, n] = cls * (-P[n, class_g]) + bce * meanBCE(M[n], mask_g)
//            + dice * diceLoss(M[n], mask_g), invalid pixels excluded.
Tensor pairwise_cost(const ModelOutput& output, const GtMaskSet& gt,
                     const LossWeights& weights);

struct MatchResult {
  std::vector<int> assignment;  // gt index -> query index, injective
  double total_cost = 0.0;
};

// Globally minimal injective assignment of the G rows to the N columns
// (Kuhn-Munkres with potentials on a zero-padded square matrix).
// Deterministic; requires G <= N and finite costs.
MatchResult hungarian(const Tensor& cost);

}  // namespace rba
