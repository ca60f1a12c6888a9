#include "rba/kmeans.hpp"

#include <cmath>
#include <limits>

#include "rba/errors.hpp"
#include "rba/prng.hpp"

namespace rba {

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

KMeansResult kmeans(const Tensor& points, int k, std::uint64_t seed, int max_iters) {
  require(points.rank() == 2, ErrorCategory::kInvalid, "kmeans: points must be [n, d]");
  const std::size_t n = points.dim(0);
  const std::size_t d = points.dim(1);
  require(k >= 1, ErrorCategory::kInvalid, "kmeans: k must be >= 1");
  require(n >= static_cast<std::size_t>(k), ErrorCategory::kInvalid,
          "kmeans: need at least k points");

  const double* pts = points.data();
  Xoshiro256ss rng(seed);

  // k-means++ seeding: first center uniform, the rest proportional to the
  // squared distance to the nearest chosen center.
  Tensor centroids({static_cast<std::size_t>(k), d});
  std::vector<double> min_sq(n, std::numeric_limits<double>::infinity());
  {
    const std::size_t first = static_cast<std::size_t>(rng.uniform_int(n));
    for (std::size_t j = 0; j < d; ++j) centroids.at(0, j) = pts[first * d + j];
    for (std::size_t i = 0; i < n; ++i)
      min_sq[i] = sq_dist(pts + i * d, centroids.data(), d);
    for (int c = 1; c < k; ++c) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += min_sq[i];
      std::size_t chosen;
      if (total <= 0.0) {
        // All remaining points coincide with chosen centers.
        chosen = static_cast<std::size_t>(rng.uniform_int(n));
      } else {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        chosen = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          acc += min_sq[i];
          if (acc >= target) {
            chosen = i;
            break;
          }
        }
      }
      double* cen = centroids.data() + static_cast<std::size_t>(c) * d;
      for (std::size_t j = 0; j < d; ++j) cen[j] = pts[chosen * d + j];
      for (std::size_t i = 0; i < n; ++i)
        min_sq[i] = std::min(min_sq[i], sq_dist(pts + i * d, cen, d));
    }
  }

  KMeansResult result;
  result.assignments.assign(n, -1);
  std::vector<double> dist_to_assigned(n, 0.0);
  std::vector<double> sums(static_cast<std::size_t>(k) * d, 0.0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);

  for (int iter = 0; iter < max_iters; ++iter) {
    // Assignment step; ties go to the lowest centroid index.
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_sq = sq_dist(pts + i * d, centroids.data(), d);
      for (int c = 1; c < k; ++c) {
        const double sq = sq_dist(pts + i * d, centroids.data() + static_cast<std::size_t>(c) * d, d);
        if (sq < best_sq) {
          best_sq = sq;
          best = c;
        }
      }
      if (result.assignments[i] != best) {
        result.assignments[i] = best;
        changed = true;
      }
      dist_to_assigned[i] = best_sq;
      inertia += best_sq;
    }
    result.inertia = inertia;
    result.inertia_history.push_back(inertia);
    result.iterations = iter + 1;
    if (!changed && iter > 0) break;

    // Update step.
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = static_cast<std::size_t>(result.assignments[i]);
      counts[c] += 1;
      for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += pts[i * d + j];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) {
        // Re-seed an empty cluster with the point farthest from its centroid.
        std::size_t farthest = 0;
        for (std::size_t i = 1; i < n; ++i)
          if (dist_to_assigned[i] > dist_to_assigned[farthest]) farthest = i;
        for (std::size_t j = 0; j < d; ++j)
          centroids.at(static_cast<std::size_t>(c), j) = pts[farthest * d + j];
        dist_to_assigned[farthest] = 0.0;
      } else {
        const double inv = 1.0 / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        for (std::size_t j = 0; j < d; ++j)
          centroids.at(static_cast<std::size_t>(c), j) =
              sums[static_cast<std::size_t>(c) * d + j] * inv;
      }
    }
  }

  result.centroids = centroids;
  return result;
}

}  // namespace rba
