#pragma once

#include <cstdint>
#include <vector>

#include "rba/tensor.hpp"

namespace rba {

struct KMeansResult {
  std::vector<int> assignments;        // one entry per point
  Tensor centroids;                    // [k, d]
  double inertia = 0.0;                // sum of squared distances to assigned centroid
  std::vector<double> inertia_history; // recorded after every Lloyd update
  int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding from the given seed. Runs until
// assignments stop changing or max_iters is reached. Empty clusters are
// re-seeded with the point farthest from its assigned centroid. Fully
// deterministic given (points, k, seed).
KMeansResult kmeans(const Tensor& points, int k, std::uint64_t seed, int max_iters = 100);

}  // namespace rba
