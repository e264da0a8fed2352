#pragma once

#include <cstdint>
#include <vector>

#include "hmae/linalg.hpp"

namespace hmae {

/// Normalized spectral clustering (Ng-Jordan-Weiss): embed with the k
/// eigenvectors of I - D^-1/2 A D^-1/2 with smallest eigenvalues, L2-normalize
/// rows, then k-means with 10 restarts.
///
/// Nodes with zero degree are split off as singleton clusters first and the
/// remaining nodes are clustered into k - (#isolated) groups (at least one).
/// Returned ids are dense and numbered in order of first appearance.
/// Throws ValidationError for negative/non-finite affinities or k > n.
std::vector<int> spectral_cluster(const SymMatrix& affinity, int k, std::uint64_t seed);

/// Renumbers arbitrary cluster ids densely in order of first appearance.
std::vector<int> canonical_labels(const std::vector<int>& labels);

/// Number of distinct ids in a label vector.
int count_clusters(const std::vector<int>& labels);

}  // namespace hmae
