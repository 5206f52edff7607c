#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tghf/kernel.hpp"
#include "tghf/types.hpp"

namespace tghf {

struct VariogramBin {
  double lag = 0.0;     // bin midpoint
  double gamma = 0.0;   // robust semivariance estimate
  long npairs = 0;
};

struct VariogramFit {
  ExpKernelParams params;
  std::vector<VariogramBin> bins;  // only bins with pairs are retained
  double objective = 0.0;          // weighted relative squared error at params
};

struct VariogramOptions {
  int nbins = 15;  // equal-width bins up to half the maximum pairwise distance
};

// Robust empirical semivariogram (fourth power of binned mean root absolute
// increments with small-count bias correction) fitted to the exponential
// model gamma(d) = sigma2 + tau2*(1 - exp(-d/r)) by weighted least squares
// on relative errors, weights = pair counts. Derivative-free bounded search;
// the returned objective never exceeds the initial guess's.
VariogramFit robust_variogram_wls(const SiteSet& sites, const Eigen::VectorXd& residuals,
                                  const VariogramOptions& opt = {});

}  // namespace tghf
