#pragma once

#include <Eigen/Dense>

#include "tghf/types.hpp"

namespace tghf {

// Exponential covariance with a nugget jump at the origin:
//   c(d) = tau2 * exp(-d/r)          d > 0
//   c(0) = tau2 + sigma2
struct ExpKernelParams {
  double tau2 = 1.0;
  double sigma2 = 0.0;
  double r = 1.0;

  void validate() const {
    require(tau2 > 0.0, errc::input, "ExpKernelParams: tau2 must be positive");
    require(sigma2 >= 0.0, errc::input, "ExpKernelParams: sigma2 must be non-negative");
    require(r > 0.0, errc::input, "ExpKernelParams: r must be positive");
  }

  double sill() const { return tau2 + sigma2; }
};

double kernel_value(double d, const ExpKernelParams& params);

// Dense covariance matrix over a site set.
Eigen::MatrixXd cov_matrix(const SiteSet& sites, const ExpKernelParams& params);

// Covariance rescaled to unit diagonal; this is the correlation matrix of a
// unit-variance field with spatial fraction tau2/(tau2+sigma2).
Eigen::MatrixXd corr_matrix(const SiteSet& sites, const ExpKernelParams& params);

}  // namespace tghf
