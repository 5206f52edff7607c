#include "tghf/kernel.hpp"

#include <cmath>

namespace tghf {

double kernel_value(double d, const ExpKernelParams& params) {
  params.validate();
  require(d >= 0.0, errc::input, "kernel_value: distance must be non-negative");
  if (d == 0.0) return params.tau2 + params.sigma2;
  return params.tau2 * std::exp(-d / params.r);
}

Eigen::MatrixXd cov_matrix(const SiteSet& sites, const ExpKernelParams& params) {
  params.validate();
  const auto n = static_cast<Eigen::Index>(sites.size());
  require(n >= 1, errc::input, "cov_matrix: needs at least one site");
  Eigen::MatrixXd c(n, n);
  const double diag = params.tau2 + params.sigma2;
  for (Eigen::Index i = 0; i < n; ++i) {
    c(i, i) = diag;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dx = sites[i].x - sites[j].x;
      const double dy = sites[i].y - sites[j].y;
      const double d = std::sqrt(dx * dx + dy * dy);
      // Coincident distinct sites see only the spatial part, same as d -> 0+.
      const double v = params.tau2 * std::exp(-d / params.r);
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

Eigen::MatrixXd corr_matrix(const SiteSet& sites, const ExpKernelParams& params) {
  Eigen::MatrixXd c = cov_matrix(sites, params);
  c /= params.sill();
  return c;
}

}  // namespace tghf
