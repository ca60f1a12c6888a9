#include "rba/losses.hpp"

#include <cmath>

#include "rba/errors.hpp"

namespace rba {

namespace {

constexpr double kProbClamp = 1e-7;

struct ClampedLog {
  double value;     // -log(clamped p)
  double gradient;  // d/dp, zero inside the clamp
  double margin;    // distance to the clamp boundary
};

ClampedLog neg_log(double p) {
  const double lo = kProbClamp, hi = 1.0 - kProbClamp;
  if (p <= lo) return {-std::log(lo), 0.0, lo - p};
  if (p >= hi) return {-std::log(hi), 0.0, p - hi};
  return {-std::log(p), -1.0 / p, std::min(p - lo, hi - p)};
}

}  // namespace

ClosedSetLoss closed_set_loss(const ModelOutput& output, const GtMaskSet& gt,
                              const MatchResult& match, const LossWeights& w) {
  const std::size_t n = output.class_probs.dim(0);
  const std::size_t no_object = output.class_probs.dim(1) - 1;
  const std::size_t hw = output.memberships.dim(1) * output.memberships.dim(2);
  require(match.assignment.size() == gt.masks.size(), ErrorCategory::kInvalid,
          "closed_set_loss: match size disagrees with ground truth");

  ClosedSetLoss loss;
  loss.d_class_probs = Tensor(output.class_probs.shape());
  loss.d_memberships = Tensor(output.memberships.shape());

  std::vector<bool> matched(n, false);
  for (std::size_t g = 0; g < gt.masks.size(); ++g) {
    const int q_signed = match.assignment[g];
    require(q_signed >= 0 && static_cast<std::size_t>(q_signed) < n && !matched[q_signed],
            ErrorCategory::kInvalid, "closed_set_loss: invalid match");
    const std::size_t q = static_cast<std::size_t>(q_signed);
    matched[q] = true;
    const GtMask& mask = gt.masks[g];

    // Classification cross-entropy.
    {
      const ClampedLog ce = neg_log(output.class_probs.at(q, static_cast<std::size_t>(mask.class_id)));
      loss.cls_term += w.cls * ce.value;
      loss.d_class_probs.at(q, static_cast<std::size_t>(mask.class_id)) += w.cls * ce.gradient;
      loss.kink_margin = std::min(loss.kink_margin, ce.margin);
    }

    // Mean BCE and soft dice over valid pixels.
    const double* m_row = output.memberships.data() + q * hw;
    double* dm_row = loss.d_memberships.data() + q * hw;
    const double inv_valid = 1.0 / static_cast<double>(gt.valid_count);
    double bce = 0.0, inter = 0.0, m_sum = 0.0;
    for (std::size_t p = 0; p < hw; ++p) {
      if (!gt.valid[p]) continue;
      const double m = m_row[p];
      if (mask.mask[p]) {
        const ClampedLog term = neg_log(m);
        bce += term.value;
        dm_row[p] += w.bce * inv_valid * term.gradient;
        loss.kink_margin = std::min(loss.kink_margin, term.margin);
        inter += m;
      } else {
        const ClampedLog term = neg_log(1.0 - m);
        bce += term.value;
        dm_row[p] += w.bce * inv_valid * (-term.gradient);
        loss.kink_margin = std::min(loss.kink_margin, term.margin);
      }
      m_sum += m;
    }
    loss.bce_term += w.bce * bce * inv_valid;

    const double denom = m_sum + static_cast<double>(mask.area);
    const double dice = 1.0 - 2.0 * inter / denom;
    loss.dice_term += w.dice * dice;
    // d dice / d m_p = -2 (y_p * denom - inter) / denom^2.
    const double inv_d2 = 1.0 / (denom * denom);
    for (std::size_t p = 0; p < hw; ++p) {
      if (!gt.valid[p]) continue;
      const double y = mask.mask[p] ? 1.0 : 0.0;
      dm_row[p] += w.dice * (-2.0) * (y * denom - inter) * inv_d2;
    }
  }

  // Unmatched queries are trained toward the no-object slot.
  for (std::size_t q = 0; q < n; ++q) {
    if (matched[q]) continue;
    const ClampedLog ce = neg_log(output.class_probs.at(q, no_object));
    loss.cls_term += w.no_object * w.cls * ce.value;
    loss.d_class_probs.at(q, no_object) += w.no_object * w.cls * ce.gradient;
    loss.kink_margin = std::min(loss.kink_margin, ce.margin);
  }

  loss.value = loss.cls_term + loss.bce_term + loss.dice_term;
  return loss;
}

LogitLoss rba_hinge_loss(const Tensor& logits, const LabelMap& labels, double alpha,
                         bool normalize) {
  require(logits.rank() == 3, ErrorCategory::kInvalid, "hinge: logits must be [K, H, W]");
  const std::size_t k = logits.dim(0);
  const std::size_t hw = logits.dim(1) * logits.dim(2);
  require(labels.size() == hw, ErrorCategory::kInvalid, "hinge: label map size mismatch");

  LogitLoss loss;
  loss.d_logits = Tensor(logits.shape());

  std::size_t outlier_count = 0;
  for (std::size_t p = 0; p < hw; ++p)
    if (labels.codes[p] == kOutlierCode) ++outlier_count;
  if (outlier_count == 0) return loss;

  const double unit = normalize ? 1.0 / static_cast<double>(outlier_count) : 1.0;
  for (std::size_t p = 0; p < hw; ++p) {
    if (labels.codes[p] != kOutlierCode) continue;
    double rba = 0.0;
    for (std::size_t c = 0; c < k; ++c) rba -= std::tanh(logits[c * hw + p]);
    const double gap = alpha - rba;
    loss.kink_margin = std::min(loss.kink_margin, std::abs(gap));
    if (gap <= 0.0) continue;  // hinge inactive; subgradient 0 at the kink
    loss.value += unit * gap * gap;
    for (std::size_t c = 0; c < k; ++c) {
      const double t = std::tanh(logits[c * hw + p]);
      // d gap / d L_c = (1 - tanh^2), since raising a logit lowers RbA.
      loss.d_logits[c * hw + p] += unit * 2.0 * gap * (1.0 - t * t);
    }
  }
  return loss;
}

LogitLoss alt_outlier_loss(OutlierLossKind kind, const Tensor& logits,
                           const LabelMap& labels, double alpha) {
  require(logits.rank() == 3, ErrorCategory::kInvalid, "outlier loss: logits must be [K, H, W]");
  const std::size_t k = logits.dim(0);
  const std::size_t hw = logits.dim(1) * logits.dim(2);
  require(labels.size() == hw, ErrorCategory::kInvalid, "outlier loss: label map size mismatch");

  LogitLoss loss;
  loss.d_logits = Tensor(logits.shape());

  auto rba_at = [&](std::size_t p) {
    double rba = 0.0;
    for (std::size_t c = 0; c < k; ++c) rba -= std::tanh(logits[c * hw + p]);
    return rba;
  };
  auto add_rba_grad = [&](std::size_t p, double upstream) {
    // d RbA / d L_c = -(1 - tanh^2).
    for (std::size_t c = 0; c < k; ++c) {
      const double t = std::tanh(logits[c * hw + p]);
      loss.d_logits[c * hw + p] -= upstream * (1.0 - t * t);
    }
  };

  switch (kind) {
    case OutlierLossKind::kMse:
      for (std::size_t p = 0; p < hw; ++p) {
        if (labels.codes[p] != kOutlierCode) continue;
        const double r = rba_at(p) - alpha;
        loss.value += r * r;
        add_rba_grad(p, 2.0 * r);
      }
      break;

    case OutlierLossKind::kL1:
      for (std::size_t p = 0; p < hw; ++p) {
        if (labels.codes[p] != kOutlierCode) continue;
        const double r = rba_at(p) - alpha;
        loss.value += std::abs(r);
        loss.kink_margin = std::min(loss.kink_margin, std::abs(r));
        if (r != 0.0) add_rba_grad(p, r > 0.0 ? 1.0 : -1.0);
      }
      break;

    case OutlierLossKind::kBce:
      // Every non-void pixel, outlier = positive class, RbA as its logit.
      for (std::size_t p = 0; p < hw; ++p) {
        if (labels.codes[p] == kVoidCode) continue;
        const double y = labels.codes[p] == kOutlierCode ? 1.0 : 0.0;
        const double r = rba_at(p);
        loss.value += std::max(r, 0.0) - r * y + std::log1p(std::exp(-std::abs(r)));
        add_rba_grad(p, sigmoid_scalar(r) - y);
      }
      break;

    case OutlierLossKind::kKl: {
      // Inliers: distance to the one-hot target = cross-entropy to the true
      // class. Outliers: KL(softmax(L) || uniform) = log K - H(p). Both
      // halves weighted by 1/2.
      std::vector<double> probs(k);
      for (std::size_t p = 0; p < hw; ++p) {
        const std::uint8_t code = labels.codes[p];
        if (code == kVoidCode) continue;
        if (code != kOutlierCode && code >= k) continue;
        double max_logit = logits[p];
        for (std::size_t c = 1; c < k; ++c)
          max_logit = std::max(max_logit, logits[c * hw + p]);
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
          probs[c] = std::exp(logits[c * hw + p] - max_logit);
          sum += probs[c];
        }
        for (std::size_t c = 0; c < k; ++c) probs[c] /= sum;

        if (code == kOutlierCode) {
          double entropy = 0.0;
          for (std::size_t c = 0; c < k; ++c)
            if (probs[c] > 0.0) entropy -= probs[c] * std::log(probs[c]);
          loss.value += 0.5 * (std::log(static_cast<double>(k)) - entropy);
          for (std::size_t c = 0; c < k; ++c) {
            const double lp = probs[c] > 0.0 ? std::log(probs[c]) : -745.0;
            loss.d_logits[c * hw + p] += 0.5 * probs[c] * (lp + entropy);
          }
        } else {
          const double py = std::max(probs[code], kProbClamp);
          loss.value += 0.5 * (-std::log(py));
          for (std::size_t c = 0; c < k; ++c) {
            const double target = c == code ? 1.0 : 0.0;
            loss.d_logits[c * hw + p] += 0.5 * (probs[c] - target);
          }
        }
      }
      break;
    }
  }
  return loss;
}

}  // namespace rba
