#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tghf/parallel.hpp"

namespace tghf {

// Partition of n feature rows into k groups. Labels are 1-based and
// ordered: cluster 1 has the smallest ordering key (see KmeansOptions),
// and centers.row(c-1) is the arithmetic mean of the rows labeled c.
struct ClusterResult {
  int k = 0;
  std::vector<int> labels;
  Eigen::MatrixXd centers;
  double inertia = 0.0;
  double aic = 0.0;
  double bic = 0.0;
};

struct KmeansOptions {
  int restarts = 20;   // seeded restarts, best inertia kept
  int max_iter = 300;  // Lloyd iteration cap per restart
  // Per-row scalar used to number the clusters: labels ascend with the
  // mean key of their members, so passing each cell's distance to a
  // reference cell numbers clusters from that cell outward. Empty means
  // clusters are numbered by their center's distance to the feature mean.
  Eigen::VectorXd order_keys;
};

// Center and scale every column to mean 0, standard deviation 1 (the
// 1/n convention, so {0, 2} maps to {-1, 1}). A constant column cannot
// be scaled and raises an input error naming it.
Eigen::MatrixXd standardize(const Eigen::MatrixXd& features);

// Lloyd iterations from a kmeans++ start, run `restarts` times with
// deterministic per-restart seed streams; a cluster that empties during
// the update is re-seeded from the point farthest from its center.
// Ties across restarts resolve to the lowest restart index, so results
// do not depend on the thread count.
ClusterResult kmeans(const Eigen::MatrixXd& features, int k, unsigned long long seed,
                     const KmeansOptions& opt = {}, const Parallel& par = Parallel::serial());

// Separation score of a labeling: the k-by-k average of mean
// between-cluster pair distance over mean within-cluster pair distance,
//   D = (1/k^2) sum_{c,c'} dbar(c, c') / wbar(c),
// where dbar is the mean distance over cross pairs, wbar over distinct
// within pairs, and the diagonal contributes exactly 1. Larger means
// better separated; 1 is the self-similarity floor. A singleton or
// zero-diameter cluster has no within distance and raises a metric
// error naming it.
double separation_d(const std::vector<int>& labels, const Eigen::MatrixXd& features);

struct SelectKRow {
  int k = 0;
  double inertia = 0.0;
  double aic = 0.0;
  double bic = 0.0;
};

// Cluster-count sweep: one kmeans run per k with shared options, scored
// by the spherical-Gaussian likelihood (variance inertia/(n d), k d + 1
// parameters). Rows are sorted by k; best_aic_k / best_bic_k summarize
// the minima.
struct SelectKResult {
  std::vector<SelectKRow> rows;
  int best_aic_k = 0;
  int best_bic_k = 0;
};

SelectKResult select_k(const Eigen::MatrixXd& features, const std::vector<int>& ks,
                       unsigned long long seed, const KmeansOptions& opt = {},
                       const Parallel& par = Parallel::serial());

}  // namespace tghf
