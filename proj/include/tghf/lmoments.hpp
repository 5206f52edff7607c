#pragma once

#include <Eigen/Dense>

#include "tghf/error.hpp"
#include "tghf/tgh.hpp"

namespace tghf {

// First four sample l-moments. The ratio accessors guard against the
// degenerate l2 = 0 case instead of quietly dividing by zero.
struct LMoments {
  double l1 = 0.0, l2 = 0.0, l3 = 0.0, l4 = 0.0;

  double tau3() const {
    require(l2 > 0.0, errc::domain, "LMoments: tau3 undefined for zero l-scale");
    return l3 / l2;
  }
  double tau4() const {
    require(l2 > 0.0, errc::domain, "LMoments: tau4 undefined for zero l-scale");
    return l4 / l2;
  }
};

// Unbiased sample l-moments through probability-weighted moments
// b_m = n^{-1} sum_j [(j-1)...(j-m)] / [(n-1)...(n-m)] y_(j). Needs n >= 4.
LMoments sample_lmoments(const Eigen::VectorXd& y);

struct LMomentMatch {
  TghParams params;
  LMoments sample;      // the moments that were matched
  double objective = 0.0;  // residual (tau3, tau4) distance at the optimum
  bool boundary = false;   // optimum pinned to a box edge (h = 0 included)
};

// Moment-matching estimation: (g, h) minimize the squared distance between
// sample and population (tau3, tau4) with h >= 0, then b = l2_hat / l2(g, h)
// and a = l1_hat - b * l1(g, h). A sample whose (tau3, tau4) falls outside
// the attainable region comes back as the closest boundary fit with the
// boundary flag set.
LMomentMatch lmoment_match(const Eigen::VectorXd& y);
LMomentMatch lmoment_match_from(const LMoments& lm);

}  // namespace tghf
