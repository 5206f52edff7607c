#pragma once

#include <Eigen/Dense>
#include <functional>

namespace tghf {

struct SimplexOptions {
  int max_eval = 800;
  double ftol = 1e-12;  // spread of simplex values
  double xtol = 1e-12;  // spread of simplex vertices (max-norm)
};

struct SimplexResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evals = 0;
  bool converged = false;
};

// Bounded Nelder-Mead simplex, minimizing. Candidate vertices are projected
// onto [lo, hi] before evaluation, so the objective is never called outside
// the box. The best value is non-increasing over iterations. Deterministic.
SimplexResult minimize_simplex(const std::function<double(const Eigen::VectorXd&)>& f,
                               const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                               const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                               const SimplexOptions& opt = {});

struct BrentResult {
  double x = 0.0;
  double value = 0.0;
  int evals = 0;
  bool converged = false;
};

// Golden-section / parabolic 1-D bounded minimizer.
BrentResult minimize_brent(const std::function<double(double)>& f, double lo, double hi,
                           double tol = 1e-10, int max_iter = 200);

}  // namespace tghf
