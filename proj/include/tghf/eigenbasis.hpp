#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tghf/kernel.hpp"
#include "tghf/types.hpp"

namespace tghf {

// Leading eigen-pairs of a kernel matrix over n sites, possibly approximated
// through a landmark subset. Columns are unit-norm; eigenvalues descend.
struct EigenBasis {
  Eigen::MatrixXd vectors;         // n x L
  Eigen::VectorXd values;          // L, descending, nonnegative after clipping
  int rank = 0;                    // L actually kept
  int requested_rank = 0;          // L asked for (clipping may reduce it)
  std::vector<int> landmark_ids;   // site indices the decomposition was built on

  bool clipped() const { return rank < requested_rank; }
};

// Landmark eigendecomposition extended to all sites: eigen-decompose the
// landmark submatrix, push the cross-covariance block through the whitened
// landmark eigenvectors, and orthonormalize the extended columns so the
// result is the best rank-L factorization the landmark subspace supports.
// With landmarks = all sites this reproduces the exact decomposition.
// Landmark eigenvalues and squared singular values below 1e-10 of their
// leaders are dropped and the rank reduced (tiny negative Nystrom
// eigenvalues are expected noise).
EigenBasis nystrom_eigs(const SiteSet& sites, const ExpKernelParams& params,
                        const std::vector<int>& landmarks, int L);

// Same, over an arbitrary symmetric PSD matrix already assembled.
EigenBasis nystrom_eigs_matrix(const Eigen::MatrixXd& full, const std::vector<int>& landmarks,
                               int L);

// Uniform landmark sample without replacement, deterministic in the seed.
std::vector<int> sample_landmarks(std::size_t n, std::size_t m, std::uint64_t seed);

// CSV sidecar persistence: <prefix>.values.csv and <prefix>.vectors.csv.
void save_eigenbasis(const EigenBasis& basis, const std::string& prefix);
EigenBasis load_eigenbasis(const std::string& prefix);

}  // namespace tghf
