#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tghf/types.hpp"

namespace tghf {

// Dense symmetric Euclidean distance matrix.
Eigen::MatrixXd pairwise_distances(const SiteSet& sites);

// Longest edge of a minimum spanning tree on the complete Euclidean graph;
// serves as the fixed correlation range for the reduced-rank model. Dense
// O(n^2) Prim, exact.
double mst_max_edge(const SiteSet& sites);

// Indices of the k sites nearest to s0, ascending by distance with ties
// broken by ascending site id. A site sharing s0's id is excluded, so a
// site is never its own neighbor.
std::vector<int> knn(const SiteSet& sites, const Site& s0, int k);

}  // namespace tghf
