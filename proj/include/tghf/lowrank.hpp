#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tghf/eigenbasis.hpp"
#include "tghf/tghrf.hpp"
#include "tghf/types.hpp"

namespace tghf {

// Reduced-rank correlation model: eigenpairs of the unit-diagonal
// correlation exp(-d/r) with the range frozen at the longest minimum
// spanning tree edge, sharpened by a power exponent m. The represented
// matrix is E diag(n p lambda^m) E^T with p = 1/sum(lambda^m), so its trace
// is n (average marginal variance one) for every m. Larger m concentrates
// the correlation on the leading modes.
struct LowRankSpec {
  EigenBasis basis;
  double r = 1.0;           // fixed correlation range
  double m = 1.0;           // spectral exponent
  double log_p = 0.0;       // log normalizer, -logsumexp(m log lambda)
  double complement = 1e-6; // per-dimension variance left outside the basis
};

// Basis over exp(-d/r) with r from mst_max_edge; `complement` is the
// average eigenvalue mass the kept modes miss, floored at 1e-6.
LowRankSpec build_lowrank_spec(const SiteSet& sites, const std::vector<int>& landmarks, int L);

// Recompute the normalizer for a new exponent (log-space, safe for m up
// to 50 on small eigenvalues).
void set_scale_exponent(LowRankSpec& spec, double m);

// Represented-correlation products and, for diagnostics, the dense matrix.
Eigen::VectorXd lowrank_apply(const LowRankSpec& spec, const Eigen::VectorXd& v);
Eigen::MatrixXd lowrank_dense(const LowRankSpec& spec);

// Log-likelihood of the transformed field with the dependence carried by
// the reduced basis at exponent `m`. Coordinates in the basis cost O(nL);
// the component of Z orthogonal to the basis is treated as isotropic with
// the complement variance, keeping the density proper on all of R^n.
double lowrank_loglik(const TghParams& params, double m, const LowRankSpec& spec,
                      const Eigen::VectorXd& y);

// Alternating maximization as in fit_full with the dependence block reduced
// to a line search over m in [0.1, 50]. The returned model stores m and
// records the frozen range in kernel.r. Requires basis rank >= 10.
TghRfModel fit_lowrank(const SiteSet& sites, const Eigen::VectorXd& y, const LowRankSpec& spec,
                       const TghRfModel& init, const FitOptions& opt = {});

}  // namespace tghf
