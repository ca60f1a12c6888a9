#include "rba/matching.hpp"

#include <cmath>
#include <limits>

#include "rba/errors.hpp"

namespace rba {

namespace {

constexpr double kProbClamp = 1e-7;

inline double clamp_prob(double p) {
  if (p < kProbClamp) return kProbClamp;
  if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
  return p;
}

}  // namespace

GtMaskSet gt_masks_from_labels(const LabelMap& labels, int num_classes) {
  GtMaskSet set;
  set.height = labels.height;
  set.width = labels.width;
  const std::size_t hw = labels.size();
  set.valid.assign(hw, 0);

  std::vector<std::size_t> areas(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t p = 0; p < hw; ++p) {
    const std::uint8_t code = labels.codes[p];
    if (code < num_classes) {
      set.valid[p] = 1;
      ++set.valid_count;
      ++areas[code];
    }
  }
  for (int c = 0; c < num_classes; ++c) {
    if (areas[static_cast<std::size_t>(c)] == 0) continue;
    GtMask m;
    m.class_id = c;
    m.area = areas[static_cast<std::size_t>(c)];
    m.mask.assign(hw, 0);
    for (std::size_t p = 0; p < hw; ++p)
      if (labels.codes[p] == c) m.mask[p] = 1;
    set.masks.push_back(std::move(m));
  }
  return set;
}

Tensor pairwise_cost(const ModelOutput& output, const GtMaskSet& gt,
                     const LossWeights& w) {
  require(w.cls >= 0.0 && w.bce >= 0.0 && w.dice >= 0.0, ErrorCategory::kInvalid,
          "pairwise_cost: weights must be nonnegative");
  const std::size_t n = output.class_probs.dim(0);
  const std::size_t num_classes = output.class_probs.dim(1) - 1;
  const std::size_t g_count = gt.masks.size();
  const std::size_t hw = output.memberships.dim(1) * output.memberships.dim(2);
  require(hw == gt.valid.size(), ErrorCategory::kInvalid, "pairwise_cost: spatial mismatch");
  require(gt.valid_count > 0, ErrorCategory::kInvalid, "pairwise_cost: no valid pixels");

  Tensor cost({std::max<std::size_t>(g_count, 1), n});
  if (g_count == 0) return Tensor({0, n}, {});

  for (std::size_t g = 0; g < g_count; ++g) {
    const GtMask& mask = gt.masks[g];
    require(mask.class_id >= 0 && static_cast<std::size_t>(mask.class_id) < num_classes,
            ErrorCategory::kInvalid, "pairwise_cost: class id out of range");
    for (std::size_t q = 0; q < n; ++q) {
      const double* m_row = output.memberships.data() + q * hw;
      double bce = 0.0, inter = 0.0, m_sum = 0.0;
      for (std::size_t p = 0; p < hw; ++p) {
        if (!gt.valid[p]) continue;
        const double m = clamp_prob(m_row[p]);
        if (mask.mask[p]) {
          bce -= std::log(m);
          inter += m_row[p];
        } else {
          bce -= std::log(1.0 - m);
        }
        m_sum += m_row[p];
      }
      bce /= static_cast<double>(gt.valid_count);
      const double dice = 1.0 - 2.0 * inter / (m_sum + static_cast<double>(mask.area));
      const double cls = -output.class_probs.at(q, static_cast<std::size_t>(mask.class_id));
      cost.at(g, q) = w.cls * cls + w.bce * bce + w.dice * dice;
    }
  }
  ensure_finite(cost, "pairwise_cost");
  return cost;
}

MatchResult hungarian(const Tensor& cost) {
  require(cost.rank() == 2, ErrorCategory::kInvalid, "hungarian: cost must be 2-D");
  const std::size_t g = cost.dim(0), n = cost.dim(1);
  require(g <= n, ErrorCategory::kInvalid, "hungarian: more rows than columns");
  ensure_finite(cost, "hungarian");

  // Shortest-augmenting-path Kuhn-Munkres on a zero-padded square matrix.
  // Padding rows cost 0 everywhere, so they never distort the real rows'
  // optimum. 1-based internal indexing.
  const std::size_t dim = n;
  auto cost_at = [&](std::size_t row, std::size_t col) -> double {
    return row < g ? cost.at(row, col) : 0.0;
  };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(dim + 1, 0.0), v(dim + 1, 0.0);
  std::vector<std::size_t> match_col(dim + 1, 0);  // column -> row (1-based)

  for (std::size_t row = 1; row <= dim; ++row) {
    std::vector<double> min_v(dim + 1, inf);
    std::vector<std::size_t> way(dim + 1, 0);
    std::vector<bool> used(dim + 1, false);
    std::size_t col0 = 0;
    match_col[0] = row;
    do {
      used[col0] = true;
      const std::size_t row0 = match_col[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t col = 1; col <= dim; ++col) {
        if (used[col]) continue;
        const double cur = cost_at(row0 - 1, col - 1) - u[row0] - v[col];
        if (cur < min_v[col]) {
          min_v[col] = cur;
          way[col] = col0;
        }
        if (min_v[col] < delta) {
          delta = min_v[col];
          col1 = col;
        }
      }
      for (std::size_t col = 0; col <= dim; ++col) {
        if (used[col]) {
          u[match_col[col]] += delta;
          v[col] -= delta;
        } else {
          min_v[col] -= delta;
        }
      }
      col0 = col1;
    } while (match_col[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match_col[col0] = match_col[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  MatchResult result;
  result.assignment.assign(g, -1);
  for (std::size_t col = 1; col <= dim; ++col) {
    const std::size_t row = match_col[col];
    if (row >= 1 && row <= g)
      result.assignment[row - 1] = static_cast<int>(col - 1);
  }
  for (std::size_t row = 0; row < g; ++row) {
    require(result.assignment[row] >= 0, ErrorCategory::kInternal, "hungarian: unmatched row");
    result.total_cost += cost.at(row, static_cast<std::size_t>(result.assignment[row]));
  }
  return result;
}

}  // namespace rba
