#pragma once

#include <cstdint>
#include <vector>

#include "hmae/linalg.hpp"

namespace hmae {

struct KMeansResult {
  std::vector<int> assignment;
  double wcss = 0.0;
  std::vector<double> wcss_trace;  ///< per Lloyd iteration of the winning restart
};

/// Lloyd's k-means with k-means++ seeding on the rows of `points`. Keeps the
/// restart with the lowest within-cluster sum of squares. Clusters that empty
/// out are re-seeded with the point farthest from its current center.
/// Throws ValidationError when k is 0 or exceeds the number of points.
KMeansResult kmeans(const Matrix& points, int k, int restarts, std::uint64_t seed,
                    int max_iterations = 300);

}  // namespace hmae
