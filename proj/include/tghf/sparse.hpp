#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tghf/kernel.hpp"
#include "tghf/parallel.hpp"
#include "tghf/tgh.hpp"
#include "tghf/types.hpp"
#include "tghf/variogram.hpp"

namespace tghf {

// Sequential conditioning of a target site on a growing design. The factor
// of C(design, design) is appended one row per extension, so each step costs
// O(j^2) and never refactors. `cinv_eps` carries C^-1 eps for the running
// conditional mean; `f0` carries the forward solve of c(design, s0), whose
// squared norm gives the conditional variance drop at s0.
//
// The recursion literature writes the update through a vector g_j and a
// scalar h_j; those names collide with the transform's shape parameters, so
// here they are gvec (= -C^-1 c / beta) and hscal (= eps' gvec). With that
// sign convention the appended block of C^-1 eps is
//   [ cinv_eps + gvec (hscal*beta + eps_new),  hscal + eps_new/beta ]
// and the conditional mean gains gamma * (hscal + eps_new/beta), where
// gamma = c(s0,new) - c(design,new)' C^-1 c(design,s0) is the same quantity
// whose square over beta is the MSPE reduction.
struct LocalState {
  Site s0;
  ExpKernelParams kernel;
  std::vector<int> design_ids;   // ordered, indices into the candidate set
  Eigen::MatrixXd chol;          // lower factor of C(design, design)
  Eigen::VectorXd cinv_eps;      // C^-1 eps over the design
  Eigen::VectorXd f0;            // chol forward solve of c(design, s0)
  double beta_j = 1.0;           // conditional variance at s0 given the design
  double psi_j = 0.0;            // eps' C^-1 eps over the design
  double mu_j = 0.0;             // c(s0,design)' C^-1 eps, mean above the trend
};

// Empty design: beta is the prior variance at s0, psi and mu are zero.
LocalState local_state_start(const Site& s0, const ExpKernelParams& kernel);

// Conditions on one more site. eps holds one residual per candidate site.
// Throws a decomposition error when the new site is numerically coincident
// with the design (nonpositive conditional variance).
LocalState local_state_extend(const LocalState& state, int new_site, const SiteSet& sites,
                              const Eigen::VectorXd& eps);

// Drop in conditional variance at s0 from adding the candidate, gamma^2 /
// beta_cand. Zero when the candidate's covariance footprint is already
// spanned by the design. Data-free: selection depends on geometry only.
double mspe_reduction(const LocalState& state, int candidate, const SiteSet& sites);

struct GreedyOptions {
  int budget = 200;         // maximum design size
  int pool = 50;            // nearest non-design candidates scanned per step
  int seed_size = 6;        // nearest-neighbor seed before greedy steps
  double threshold = -1.0;  // stop when the best reduction falls below this;
                            // negative means 1e-6 * c(s0,s0)
  int min_size = 0;         // the threshold stop only applies at this size or
                            // beyond, so callers can guarantee identifiable
                            // local likelihoods on smooth fields
};

struct GreedyResult {
  std::vector<int> design;  // ordered site indices
  std::vector<std::string> warnings;
};

// Variance-reduction-greedy design: seed with nearest neighbors, then
// repeatedly add the candidate with the largest MSPE reduction among the
// pool members inside the screening radius (probit of the normalized best
// reduction; when the radius screens everything out the whole pool is
// scanned). Stops at the budget or when the best reduction drops below the
// threshold. Sites coincident with s0 are never selected.
GreedyResult greedy_local_design(const Site& s0, const SiteSet& sites,
                                 const ExpKernelParams& kernel, const GreedyOptions& opt = {});

struct LocalFit {
  Site site;
  TghParams params;         // conditional location/scale with the local shape
  TghParams mle;            // local maximum-likelihood a, b, g, h
  double lengthscale = 1.0; // fitted (or imposed) kernel range
  int design_size = 0;
  bool ok = true;
  std::string message;      // diagnostics when ok is false
};

struct LocalFitOptions {
  double r_init = -1.0;  // starting range; negative derives one from the design
  bool fix_g = false;    // freeze shape at g0 / h0 (used by the smoothed pass)
  bool fix_h = false;
  bool fix_r = false;    // freeze the range at r_init
  double g0 = 0.0;
  double h0 = 0.0;
};

// Maximizes the transformed-field likelihood on the design sites over
// (a, b, g, h, r) jointly, then reads the conditional location and scale at
// s0 off the sequential recursions: the latent conditional mean is pushed
// through the fitted transform, and the conditional variance is the
// Gaussian one (identical under both local models) times psi/(j-2).
// Degenerate (constant) design data throws a fit error; optimizer-level
// trouble comes back as a flagged LocalFit instead.
LocalFit fit_local_tgh(const Site& s0, const std::vector<int>& design, const SiteSet& sites,
                       const Eigen::VectorXd& y, const LocalFitOptions& opt = {});

struct SparseFieldOptions {
  int budget = 200;
  int pool = 50;
  int seed_size = 6;
  double threshold = -1.0;
  bool smooth = true;            // smooth r, g, h surfaces and refit
  double bandwidth_cells = 2.0;  // Gaussian smoothing bandwidth, in cells
};

struct SparseFieldResult {
  std::vector<LocalFit> fits;  // grid-aligned; masked cells carry a flag
  double start_lengthscale = 0.0;
  std::vector<std::string> warnings;
};

// Per-site sweep: one global starting lengthscale from the robust
// variogram, an independent greedy design and local fit per observed site,
// then (optionally) Gaussian-kernel smoothing of the lengthscale and shape
// surfaces followed by one refinement pass that refits location and scale
// under the smoothed surfaces. Per-site failures are flagged and skipped;
// the sweep aborts only when more than half the observed sites fail.
SparseFieldResult fit_sparse_field(const FieldFrame& frame, const SparseFieldOptions& opt = {},
                                   const Parallel& par = Parallel::serial());

}  // namespace tghf
