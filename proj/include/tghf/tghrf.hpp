#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <array>
#include <functional>

#include "tghf/kernel.hpp"
#include "tghf/tgh.hpp"
#include "tghf/types.hpp"

namespace tghf {

// Transformed Gaussian random field Y(s) = a + b * tau_gh(Z(s)) where Z is a
// unit-variance Gaussian field. The transform block (a, b, g, h) and the
// dependence block are estimated by alternating maximization. `kernel` holds
// the dependence parameters of the full model; `m` holds the spectral
// exponent when the dependence is carried by a reduced eigenbasis instead.
struct TghRfModel {
  TghParams params;
  ExpKernelParams kernel{1.0, 0.0, 1.0};
  double m = 1.0;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;

  // 95% intervals for a, b, g, h in that order; b's interval comes from the
  // log-scale curvature so it stays positive.
  std::array<double, 4> ci_low{};
  std::array<double, 4> ci_high{};
};

struct FitOptions {
  int max_iter = 50;        // outer alternation rounds
  double tol = 1e-6;        // |delta loglik| convergence threshold
  bool fix_g = false;       // freeze g at its initial value
  bool fix_h = false;       // freeze h at its initial value
  bool fix_kernel = false;  // skip the dependence block entirely
  bool compute_ci = true;
};

// Componentwise inverse transform z_i = tau^{-1}((y_i - a)/b). An
// unreachable value (possible when h = 0 and g != 0, where tau is bounded
// on one side) raises a numeric error naming the offending entry.
Eigen::VectorXd transform_to_z(const Eigen::VectorXd& y, const TghParams& params);

// Exact log-likelihood: the Gaussian log-density of Z under the correlation
// matrix of `kernel`, minus the change-of-variables terms n*log b and
// sum_i log tau'(z_i). Only the correlation (sill ratio and range) of
// `kernel` matters; the overall covariance scale is absorbed by b.
double tgh_rf_loglik(const TghParams& params, const ExpKernelParams& kernel,
                     const SiteSet& sites, const Eigen::VectorXd& y);

// Same with the correlation factor precomputed, for inner loops that hold
// the dependence fixed. `corr_llt` must factor the correlation matrix and
// `log_det` must equal its log-determinant.
double tgh_rf_loglik(const TghParams& params, const Eigen::LLT<Eigen::MatrixXd>& corr_llt,
                     double log_det, const Eigen::VectorXd& y);

// Moment-based starting point: a from the median, b from the normal-matched
// interquartile range, g and h from l-moment ratio matching, dependence from
// a robust variogram fit on the transformed values.
TghRfModel default_init(const SiteSet& sites, const Eigen::VectorXd& y);

// Alternating two-block maximization: a bounded simplex pass over
// (a, log b, g, h), then one over (log tau2, log sigma2, log r), repeated
// until the log-likelihood moves less than `tol`. The loglik sequence is
// non-decreasing; a decrease beyond rounding raises an optimizer error.
TghRfModel fit_full(const SiteSet& sites, const Eigen::VectorXd& y, const TghRfModel& init,
                    const FitOptions& opt = {});

// One simplex pass maximizing `loglik` over the transform block from
// `start`; frozen coordinates stay at their start values. The box for a and
// log b is derived from the data range in `y`. Returns the improved
// parameters and writes the attained value through `attained`.
TghParams maximize_transform_block(const std::function<double(const TghParams&)>& loglik,
                                   const TghParams& start, const Eigen::VectorXd& y, bool fix_g,
                                   bool fix_h, double* attained);

// 95% intervals for (a, b, g, h) from the observed-information matrix of
// `loglik` at `at`, holding everything else fixed. Curvature is taken in
// (a, log b, g, h) coordinates with the h stencil shifted off the h = 0
// boundary when needed, so the intervals are conditional approximations.
void transform_block_cis(const std::function<double(const TghParams&)>& loglik,
                         const TghParams& at, bool fix_g, bool fix_h,
                         std::array<double, 4>& lo, std::array<double, 4>& hi);

}  // namespace tghf
