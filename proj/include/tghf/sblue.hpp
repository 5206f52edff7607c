#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "tghf/eigenbasis.hpp"
#include "tghf/kernel.hpp"
#include "tghf/types.hpp"

namespace tghf {

// Fitted generalized-least-squares spatial predictor. `weights` folds the
// covariance solve against the residuals into one n-vector at fit time, so a
// prediction is one covariance-vector assembly plus a dot product in either
// mode. Coincident prediction sites reproduce the observed value exactly
// (the cross-covariance at distance zero carries the nugget, matching the
// covariance matrix diagonal).
struct SblueModel {
  SiteSet sites;
  Eigen::MatrixXd X;
  ExpKernelParams kernel{1.0, 0.0, 1.0};
  std::optional<EigenBasis> basis;  // engaged = rank-reduced mode

  Eigen::VectorXd z_hat;
  Eigen::VectorXd residuals;  // Y - X z_hat
  Eigen::VectorXd t_values;
  Eigen::VectorXd weights;  // C^{-1} residuals (or its rank-reduced stand-in)
  std::vector<double> vif;
  std::vector<std::string> warnings;  // VIF > 10 notes
  bool fitted = false;
};

// z_hat = (X' C^{-1} X)^{-1} X' C^{-1} Y with C from the exponential kernel.
// Passing a basis replaces C^{-1} by E_L Lambda_L^{-1} E_L' (clipped
// eigenvalues make this a pseudo-inverse). t-values divide each coefficient
// by the square root of the matching diagonal of (X' C^{-1} X)^{-1}.
SblueModel gls_fit(const SiteSet& sites, const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                   const ExpKernelParams& kernel, const EigenBasis* basis = nullptr);

// X(s*)' z_hat + c(s*)' weights.
double sblue_predict(const Site& s0, const Eigen::VectorXd& x0, const SblueModel& model);

struct BoxCoxResult {
  double lambda = 1.0;
  Eigen::VectorXd transformed;
};

// Profile-likelihood Box-Cox exponent over lambda in [-2, 2] on a refining
// grid; lambda = 0 means the log transform. Requires strictly positive data.
BoxCoxResult boxcox_fit_transform(const Eigen::VectorXd& y);

}  // namespace tghf
