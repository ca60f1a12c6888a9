#pragma once

#include <limits>

#include "rba/matching.hpp"
#include "rba/model.hpp"
#include "rba/scene.hpp"

namespace rba {

// Scalar loss with analytic partials w.r.t. the model output heads.
struct ClosedSetLoss {
  double value = 0.0;
  double cls_term = 0.0, bce_term = 0.0, dice_term = 0.0;
  Tensor d_class_probs;  // [N, K+1]
  Tensor d_memberships;  // [N, H, W]
  // Distance to the nearest probability-clamp boundary seen while
  // evaluating log terms; finite-difference checks skip kink-adjacent
  // coordinates.
  double kink_margin = std::numeric_limits<double>::infinity();
};

// Matched pairs: cls * CE(P[n], class_g) + bce * meanBCE(M[n], mask_g)
//              + dice * dice(M[n], mask_g).
// Unmatched queries: no_object * cls * CE(P[n], no-object).
ClosedSetLoss closed_set_loss(const ModelOutput& output, const GtMaskSet& gt,
                              const MatchResult& match, const LossWeights& weights);

// Scalar loss over aggregated logits L with analytic dL.
struct LogitLoss {
  double value = 0.0;
  Tensor d_logits;  // [K, H, W]
  double kink_margin = std::numeric_limits<double>::infinity();
};

// Squared hinge on the outlier pixels: sum max(0, alpha - RbA(x))^2 with
// RbA(x) = -sum_k tanh(L_k(x)). Normalized by |outliers| by default; the
// plain sum is selectable. Zero (with zero gradient) when the scene has no
// outlier pixels.
LogitLoss rba_hinge_loss(const Tensor& logits, const LabelMap& labels, double alpha,
                         bool normalize = true);

enum class OutlierLossKind { kMse, kL1, kBce, kKl };

// Alternative outlier objectives:
//   MSE  sum_out (RbA - alpha)^2
//   L1   sum_out |RbA - alpha|
//   BCE  binary cross-entropy over all non-void pixels with RbA as the
//        positive-class logit (outlier = positive)
//   KL   0.5 * (sum_in CE to the true class + sum_out KL(softmax(L) || U))
LogitLoss alt_outlier_loss(OutlierLossKind kind, const Tensor& logits,
                           const LabelMap& labels, double alpha);

}  // namespace rba
